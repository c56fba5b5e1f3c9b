use super::*;
use crate::generators::{rho2_analytic, GapLaw, ProcessModel, Rho2Options};
use crate::quad::adaptive;
use proptest::prelude::*;
use std::f64::consts::{LN_2, PI};

const ZETA_HALF: f64 = -1.4603545088095868;

fn riesz() -> Kernel {
    Kernel::riesz(1, 0.5).unwrap()
}

fn ladder(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 2f64.powi(e)).collect()
}

fn rho2(model: ProcessModel) -> Rho2Analytic {
    rho2_analytic(&model, &Rho2Options::default()).unwrap()
}

#[test]
fn hint_of_empty_and_single_point() {
    let k = Kernel::log1d();
    let w = Window::centered(1, 2.0).unwrap();
    let empty = PointConfiguration::empty(w.clone());
    assert!((hint_r(&empty, 2.0, &k).unwrap() - (6.0 - 4.0 * LN_2)).abs() < 1e-13);
    let one = PointConfiguration::new(w, vec![0.0]).unwrap();
    assert!((hint_r(&one, 2.0, &k).unwrap() - (2.0 - 4.0 * LN_2)).abs() < 1e-13);
}

#[test]
fn hint_rejects_coincident_points() {
    let w = Window::centered(1, 4.0).unwrap();
    let c = PointConfiguration::new(w, vec![0.5, 0.5, 1.0]).unwrap();
    assert!(matches!(hint_r(&c, 4.0, &riesz()), Err(Error::Singularity(_))));
    assert!(matches!(hint_r(&c, 5.0, &riesz()), Err(Error::Domain(_))));
}

/// Averaging the pair-sum energy of `u + Z` over the shift u reproduces the
/// tent-weighted lattice series.
#[test]
fn shift_averaged_lattice_pair_sum_matches_series() {
    for kernel in [riesz(), Kernel::log1d()] {
        let r = 16.0;
        let w = Window::centered(1, r).unwrap();
        let h = |t: f64| {
            let pts: Vec<f64> = (0..16).map(|j| -8.0 + t + j as f64).collect();
            let c = PointConfiguration::new(w.clone(), pts).unwrap();
            hint_r(&c, r, &kernel).unwrap() / r
        };
        let avg = adaptive(h, 0.0, 1.0, 1e-11, 1e-11).unwrap();
        let series = lattice_series_at(&kernel, r);
        assert!((avg - series).abs() < 1e-6, "{kernel}: {avg} vs {series}");
    }
}

#[test]
fn lattice_series_frozen_values_and_limits() {
    // ladder values and limits from an independent mpmath evaluation
    let table =
        [(64.0, -1.821877, -2.914538), (256.0, -1.832975, -2.919126), (1024.0, -1.836426, -2.920308), (4096.0, -1.837458, -2.920608)];
    for (r, log_v, riesz_v) in table {
        assert!((lattice_series_at(&Kernel::log1d(), r) - log_v).abs() < 1e-6);
        assert!((lattice_series_at(&riesz(), r) - riesz_v).abs() < 1e-6);
    }
    let log = wint_lattice_series(&Kernel::log1d(), &ladder(6, 16)).unwrap();
    assert!((log.extrapolated + (2.0 * PI).ln()).abs() < 1e-7, "{log:?}");
    assert!(log.extrapolation_error < 1e-6);
    let rz = wint_lattice_series(&riesz(), &ladder(6, 16)).unwrap();
    assert!((rz.extrapolated - 2.0 * ZETA_HALF).abs() < 1e-7, "{}", rz.extrapolated);
    // doubling R changes the value by at most C / R
    let c = rz.convergence_constant;
    for w in rz.entries.windows(2) {
        assert!((w[1].value - w[0].value).abs() <= c / w[0].r + 1e-15);
    }
}

#[test]
fn lattice_quadrature_route_equals_series() {
    let r = rho2(ProcessModel::lattice(1));
    for kernel in [riesz(), Kernel::log1d()] {
        for rr in [8.0, 64.0, 1000.0] {
            let a = wint_at(&r, &kernel, rr).unwrap();
            let b = lattice_series_at(&kernel, rr);
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{kernel} R={rr}: {a} vs {b}");
        }
    }
}

#[test]
fn poisson_is_exactly_zero() {
    for d in 1..=3 {
        let r = rho2(ProcessModel::poisson(d));
        let k = if d == 1 { Kernel::log1d() } else { Kernel::riesz(d, d as f64 - 1.0).unwrap() };
        let rep = wint_from_rho2(&r, &k, &[4.0, 8.0, 16.0]).unwrap();
        assert!(rep.values().iter().all(|v| *v == 0.0));
        assert_eq!(rep.extrapolated, 0.0);
    }
}

#[test]
fn block_closed_forms() {
    for k in [2u32, 4] {
        let kf = k as f64;
        let r = rho2(ProcessModel::bernoulli_block(k, 1).unwrap());
        let log = wint_from_rho2(&r, &Kernel::log1d(), &ladder(4, 10)).unwrap();
        assert!((log.extrapolated - (kf.ln() - 1.5)).abs() < 1e-10, "k={k}: {}", log.extrapolated);
        let s = 0.5;
        let rz = wint_from_rho2(&r, &riesz(), &ladder(4, 10)).unwrap();
        let exact = -2.0 * kf.powf(-s) / ((1.0 - s) * (2.0 - s));
        assert!((rz.extrapolated - exact).abs() < 1e-10, "k={k}: {}", rz.extrapolated);
        // compact support: the untilted integral is the R -> infinity limit
        let bs = wbs_energy(&r, &Kernel::log1d(), 100.0).unwrap();
        assert!((bs - log.extrapolated).abs() < 1e-10);
    }
}

#[test]
fn block_energy_in_two_dimensions_against_nested_quadrature() {
    let kernel = Kernel::log2d();
    let r = rho2(ProcessModel::bernoulli_block(2, 2).unwrap());
    let rr = 3.0;
    let f = |x: f64, y: f64| kernel.radial((x * x + y * y).sqrt()) * (r.continuous(&[x, y]) - 1.0) * (rr - x) * (rr - y);
    let inner = |x: f64| adaptive(|y| f(x, y), 0.0, 2.0, 1e-12, 1e-11).unwrap();
    let oracle = 4.0 * adaptive(inner, 0.0, 2.0, 1e-11, 1e-10).unwrap() / (rr * rr);
    let value = wint_at(&r, &kernel, rr).unwrap();
    assert!((value - oracle).abs() < 1e-8, "{value} vs {oracle}");
}

#[test]
fn vibrating_lattice_gaps_match_frozen_table() {
    // k = 2 hats tile the line: rho_2 - 1 = -(1 - |v|)_+, the k = 1 block
    let r2 = rho2(ProcessModel::vibrating_lattice(2).unwrap());
    let b1 = rho2(ProcessModel::bernoulli_block(1, 1).unwrap());
    for v in [0.0, 0.3, 0.99, 1.5, 7.25] {
        assert!((r2.continuous(&[v]) - b1.continuous(&[v])).abs() < 1e-14);
    }
    // gap W(pi_k) - W(P_Z) = 2 sum_m (E g(m + X) - g(m)), X the hat noise,
    // summed independently with series acceleration
    let table = [
        (2u32, 0.337877066409, 0.25404230353),
        (3, 0.130326929181, 0.0840285302859),
        (4, 0.0710082846669, 0.0446200228104),
        (8, 0.0172787023332, 0.0106346927945),
        (16, 0.00429253697078, 0.00262954218965),
    ];
    let rs = ladder(6, 13);
    let zl = wint_lattice_series(&Kernel::log1d(), &rs).unwrap();
    let zr = wint_lattice_series(&riesz(), &rs).unwrap();
    for (k, log_gap, riesz_gap) in table {
        let r = rho2(ProcessModel::vibrating_lattice(k).unwrap());
        let l = wint_from_rho2(&r, &Kernel::log1d(), &rs).unwrap();
        let z = wint_from_rho2(&r, &riesz(), &rs).unwrap();
        assert!((l.extrapolated - zl.extrapolated - log_gap).abs() < 1e-7, "k={k} log {}", l.extrapolated - zl.extrapolated);
        assert!((z.extrapolated - zr.extrapolated - riesz_gap).abs() < 1e-7, "k={k} riesz {}", z.extrapolated - zr.extrapolated);
    }
}

#[test]
fn hardcore_bs_energy() {
    let v = wbs_energy(&Rho2Analytic::hardcore(), &Kernel::log1d(), 10.0).unwrap();
    assert!((v - (-1.0 - LN_2)).abs() < 1e-13);
    assert!(wbs_energy(&Rho2Analytic::hardcore(), &riesz(), 10.0).is_err());
    assert!(matches!(wbs_energy(&rho2(ProcessModel::lattice(1)), &Kernel::log1d(), 10.0), Err(Error::NotApplicable(_))));
}

#[test]
fn gamma_renewal_routes_agree() {
    // exact series versus FFT tabulation of the same correlation
    for theta in [2.0, 6.0] {
        let gap = GapLaw::Gamma { shape: theta };
        let series = rho2(ProcessModel::renewal(gap).unwrap());
        let grid = crate::generators::tabulate_renewal(&gap, &Rho2Options::default()).unwrap();
        let rs = ladder(6, 10);
        for kernel in [riesz(), Kernel::log1d()] {
            let a = wint_from_rho2(&series, &kernel, &rs).unwrap().extrapolated;
            let b = wint_from_rho2(&grid, &kernel, &rs).unwrap().extrapolated;
            assert!((a - b).abs() < 5e-5, "theta {theta} {kernel}: {a} vs {b}");
        }
    }
}

#[test]
fn renewal_divergence_is_reported() {
    let r = rho2(ProcessModel::renewal(GapLaw::Gamma { shape: 0.4 }).unwrap());
    assert!(matches!(wint_from_rho2(&r, &riesz(), &[8.0, 16.0]), Err(Error::Diverging(_))));
    // the log kernel stays integrable
    assert!(wint_from_rho2(&r, &Kernel::log1d(), &[8.0, 16.0]).unwrap().extrapolated.is_finite());
}

#[test]
fn lattice_minimality_and_sub_poisson_bound() {
    let rs = ladder(6, 12);
    for kernel in [riesz(), Kernel::log1d()] {
        let z = wint_lattice_series(&kernel, &rs).unwrap().extrapolated;
        let models = [
            ProcessModel::vibrating_lattice(3).unwrap(),
            ProcessModel::bernoulli_block(3, 1).unwrap(),
            ProcessModel::renewal(GapLaw::Gamma { shape: 3.0 }).unwrap(),
            ProcessModel::renewal(GapLaw::Gamma { shape: 20.0 }).unwrap(),
        ];
        for m in models {
            let w = wint_from_rho2(&rho2(m), &kernel, &rs).unwrap().extrapolated;
            assert!(w >= z - 1e-8, "{m:?} {kernel}: {w} < {z}");
        }
    }
    let hardcore = wbs_energy(&Rho2Analytic::hardcore(), &Kernel::log1d(), 1.0).unwrap();
    for k in [1u32, 2, 5] {
        let w = wint_from_rho2(&rho2(ProcessModel::bernoulli_block(k, 1).unwrap()), &Kernel::log1d(), &rs).unwrap();
        assert!(w.extrapolated >= hardcore);
    }
}

#[test]
fn monte_carlo_poisson_vanishes() {
    let rep = wint_monte_carlo(&ProcessModel::poisson(1), &riesz(), &[8.0, 16.0, 32.0, 64.0], 400, 7).unwrap();
    let se = rep.extrapolated_stderr.unwrap();
    assert!(rep.extrapolated.abs() < 3.0 * se + rep.extrapolation_error, "{rep:?}");
    assert_eq!(rep.singular_replicas, 0);
}

#[test]
fn monte_carlo_block_matches_quadrature() {
    let model = ProcessModel::bernoulli_block(2, 1).unwrap();
    let rs = [8.0, 16.0, 32.0, 64.0];
    let mc = wint_monte_carlo(&model, &Kernel::log1d(), &rs, 2000, 3).unwrap();
    let quad = wint_from_rho2(&rho2(model), &Kernel::log1d(), &rs).unwrap();
    for (a, b) in mc.entries.iter().zip(&quad.entries) {
        assert!((a.value - b.value).abs() < 4.0 * a.stderr.unwrap(), "R={}: {} vs {}", a.r, a.value, b.value);
    }
    let same_fit = mc.refit(&quad.values()).unwrap();
    assert!((mc.extrapolated - same_fit).abs() < 4.0 * mc.extrapolated_stderr.unwrap());
}

#[test]
fn monte_carlo_in_two_dimensions() {
    let model = ProcessModel::bernoulli_block(1, 2).unwrap();
    let rs = [4.0, 6.0];
    let mc = wint_monte_carlo(&model, &Kernel::log2d(), &rs, 300, 5).unwrap();
    let quad = wint_from_rho2(&rho2(model), &Kernel::log2d(), &rs).unwrap();
    for (a, b) in mc.entries.iter().zip(&quad.entries) {
        assert!((a.value - b.value).abs() < 4.0 * a.stderr.unwrap(), "R={}: {} vs {}", a.r, a.value, b.value);
    }
}

#[test]
fn report_json_shape() {
    let rep = wint_lattice_series(&riesz(), &[4.0, 8.0]).unwrap();
    let v: serde_json::Value = serde_json::to_value(&rep).unwrap();
    assert_eq!(v["route"], "lattice_series");
    assert_eq!(v["kernel"]["family"], "riesz");
    assert_eq!(v["entries"][0]["R"], 4.0);
    assert!(v["entries"][0]["stderr"].is_null());
}

#[test]
fn ladder_validation() {
    assert!(wint_lattice_series(&riesz(), &[8.0, 4.0]).is_err());
    assert!(wint_lattice_series(&Kernel::log2d(), &[4.0, 8.0]).is_err());
    assert!(wint_monte_carlo(&ProcessModel::poisson(1), &riesz(), &[4.0], 10, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn hint_translation_invariant(shift in -50.0f64..50.0, seed in 0u64..1000) {
        let w = Window::centered(1, 12.0).unwrap();
        let c = sample(&ProcessModel::poisson(1), &w, Seed::new(seed, 0)).unwrap();
        prop_assume!(!c.has_duplicates());
        let t = c.translated(&[shift]);
        let a = hint_r(&c, 12.0, &riesz()).unwrap();
        let b = hint_r(&t, 12.0, &riesz()).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }
}
