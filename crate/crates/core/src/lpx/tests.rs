use super::*;
use proptest::prelude::*;
use std::f64::consts::{LN_2, PI};

fn brute_transform(values: &[f64], disc: &Discretization) -> Vec<f64> {
    disc.freq_grid()
        .iter()
        .map(|xi| 2.0 * disc.h * disc.grid().iter().zip(values).map(|(v, t)| t * (2.0 * PI * xi * v).cos()).sum::<f64>())
        .collect()
}

#[test]
fn discretization_validation() {
    assert!(Discretization::new(8.0, 0.25).is_ok());
    assert!(Discretization::new(8.0, 0.3).is_err());
    assert!(Discretization::new(8.0, 0.0).is_err());
    assert!(Discretization::with_tent(8.0, 0.25, 4.0).is_err());
    let d = Discretization::new(8.0, 0.25).unwrap();
    assert_eq!(d.n_cells, 32);
    assert_eq!(d.freq_grid().len(), 64);
    assert!((d.freq_grid()[1] - 1.0 / 32.0).abs() < 1e-15);
}

#[test]
fn transform_matches_riemann_sum() {
    let d = Discretization::new(6.0, 0.5).unwrap();
    let vals: Vec<f64> = (0..d.n_cells).map(|j| ((j * 7 % 5) as f64 - 2.0) * 0.3).collect();
    let fast = transform(&vals, &d).unwrap();
    let slow = brute_transform(&vals, &d);
    for (a, b) in fast.iter().zip(&slow) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    assert!(transform(&vec![0.0; d.n_cells], &d).unwrap().iter().all(|x| *x == 0.0));
}

#[test]
fn transform_roundtrip() {
    let d = Discretization::new(16.0, 0.125).unwrap();
    let vals: Vec<f64> = (0..d.n_cells).map(|j| (j as f64 * 0.37).sin()).collect();
    let back = inverse_transform(&transform(&vals, &d).unwrap(), &d).unwrap();
    for j in 0..d.padded_len() {
        let expect = if j < d.n_cells { vals[j] } else { 0.0 };
        assert!((back[j] - expect).abs() < 1e-8);
    }
}

#[test]
fn zero_and_negative_two() {
    let d = Discretization::new(8.0, 0.125).unwrap();
    let k = Kernel::log1d();
    let z = evaluate_candidate(&vec![0.0; d.n_cells], &d, &k).unwrap();
    assert_eq!(z.objective, 0.0);
    assert!(z.feasible_direct && z.feasible_fourier && z.max_violation == 0.0);
    let m2 = evaluate_candidate(&vec![-2.0; d.n_cells], &d, &k).unwrap();
    assert!(!m2.feasible_direct);
    assert!(m2.max_violation >= 1.0);
    let direct_only = vec![-2.0; d.n_cells].iter().map(|t| -1.0 - t).fold(0.0, f64::max);
    assert_eq!(direct_only, 1.0);
    assert!(evaluate_candidate(&[0.0; 3], &d, &k).is_err());
    assert!(evaluate_candidate(&vec![f64::NAN; d.n_cells], &d, &k).is_err());
}

#[test]
fn hardcore_objective_closed_form() {
    // 2 int_0^{1/2} log(v) (1 - v/R) dv
    let exact = |r: f64| -1.0 - LN_2 - (2.0 / r) * (0.125 * (0.5f64).ln() - 1.0 / 16.0);
    for (vmax, h) in [(8.0, 0.25), (64.0, 1.0 / 16.0), (1024.0, 0.5)] {
        let d = Discretization::new(vmax, h).unwrap();
        let c = evaluate_candidate(&d.hardcore(), &d, &Kernel::log1d()).unwrap();
        assert!((c.objective - exact(vmax)).abs() < 1e-12, "{vmax}: {} vs {}", c.objective, exact(vmax));
        assert!(c.feasible_direct && c.feasible_fourier, "{c:?}");
    }
    let far = Discretization::with_tent(8.0, 0.25, 1e12).unwrap();
    let c = evaluate_candidate(&far.hardcore(), &far, &Kernel::log1d()).unwrap();
    assert!((c.objective + 1.0 + LN_2).abs() < 1e-10);
    let riesz = evaluate_candidate(&far.hardcore(), &far, &Kernel::riesz(1, 0.5).unwrap()).unwrap();
    assert!((riesz.objective + 4.0 * 0.5f64.sqrt()).abs() < 1e-10);
}

#[test]
fn solver_dominates_references() {
    for k in [Kernel::log1d(), Kernel::riesz(1, 0.5).unwrap()] {
        let d = Discretization::new(16.0, 0.125).unwrap();
        let res = minimize_t2(&d, &k, &SolverOptions { iterations: 60, ..Default::default() }).unwrap();
        let b = &res.best;
        assert!(b.max_violation <= 1e-6);
        assert!(b.objective <= res.hardcore_objective.min(0.0) + 1e-9);
        assert!(res.best_trace.windows(2).all(|w| w[1] <= w[0]));
        let again = evaluate_candidate(&b.values, &d, &k).unwrap();
        assert!((again.objective - b.objective).abs() < 1e-10);
    }
}

#[test]
fn solver_improves_on_hardcore_for_log() {
    let d = Discretization::new(16.0, 0.125).unwrap();
    let res = minimize_t2(&d, &Kernel::log1d(), &SolverOptions { iterations: 200, ..Default::default() }).unwrap();
    assert!(res.best.objective < res.hardcore_objective - 1e-3, "{} vs {}", res.best.objective, res.hardcore_objective);
    // pushed toward -1 near the origin where g is largest
    assert!(res.best.values[0] < -0.9);
    assert!((res.best.zero_frequency + 1.0).abs() < 1e-9);
}

#[test]
fn solver_input_validation() {
    let d = Discretization::new(4.0, 0.25).unwrap();
    let k = Kernel::log1d();
    assert!(minimize_t2(&d, &k, &SolverOptions { iterations: 0, ..Default::default() }).is_err());
    let bad = SolverOptions { schedule: StepSchedule::Constant { step: -1.0 }, ..Default::default() };
    assert!(minimize_t2(&d, &k, &bad).is_err());
    assert!(minimize_t2(&d, &Kernel::log2d(), &SolverOptions::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn feasible_set_is_convex(a in proptest::collection::vec(-1.0f64..0.5, 16), b in proptest::collection::vec(-1.0f64..0.5, 16), lam in 0.0f64..1.0) {
        let d = Discretization::new(2.0, 0.125).unwrap();
        let k = Kernel::log1d();
        // scale both into the feasible set first
        let fix = |v: Vec<f64>| {
            let c = evaluate_candidate(&v, &d, &k).unwrap();
            v.iter().map(|x| x / (1.0 + c.max_violation)).collect::<Vec<f64>>()
        };
        let (a, b) = (fix(a), fix(b));
        prop_assert!(evaluate_candidate(&a, &d, &k).unwrap().max_violation <= 1e-12);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lam * x + (1.0 - lam) * y).collect();
        prop_assert!(evaluate_candidate(&mix, &d, &k).unwrap().max_violation <= 1e-12);
    }
}

#[test]
fn capped_sum_projection() {
    let mut z = vec![3.0, -5.0, 0.5, 0.2];
    project_capped_sum(&mut z, 0.0);
    assert!((z.iter().sum::<f64>()).abs() < 1e-12);
    assert!(z.iter().all(|x| *x >= -1.0));
    assert_eq!(z[1], -1.0);
    // shifted uniformly where free
    assert!(((3.0 - z[0]) - (0.5 - z[2])).abs() < 1e-12);
}
