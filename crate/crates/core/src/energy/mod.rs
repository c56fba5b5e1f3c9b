//! Intrinsic energy: pair sums on samples, quadrature of the two-point
//! correlation against the tent weight, and the lattice series.

pub mod background;
mod extrapolate;

use serde::{Deserialize, Serialize};

pub use background::{background_background, point_background};
pub use extrapolate::{correction_basis, richardson, weighted_basis_intercept, weighted_intercept};

use crate::error::{ensure, Error, Result};
use crate::generators::{sample, ProcessModel, Rho2Analytic, Seed, Segment};
use crate::geometry::{PointConfiguration, Window};
use crate::kernel::Kernel;
use crate::par;
use crate::quad::{adaptive, rule};
use crate::stats::{covariance_of_means, mean_stderr, pairwise_sum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyRoute {
    PairSumMc,
    Rho2Quadrature,
    LatticeSeries,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyEntry {
    #[serde(rename = "R")]
    pub r: f64,
    pub value: f64,
    pub stderr: Option<f64>,
}

/// Energy ladder over R with its extrapolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub route: EnergyRoute,
    pub kernel: Kernel,
    pub entries: Vec<EnergyEntry>,
    pub extrapolated: f64,
    pub extrapolation_error: f64,
    /// Monte Carlo standard error of `extrapolated` (pair-sum route only).
    pub extrapolated_stderr: Option<f64>,
    /// `max |W(R') - W(R)| / |1/R - 1/R'|` over consecutive ladder points.
    pub convergence_constant: f64,
    pub singular_replicas: usize,
}

impl EnergyReport {
    fn new(route: EnergyRoute, kernel: &Kernel, entries: Vec<EnergyEntry>, extrapolated: f64, extrapolation_error: f64) -> Self {
        let convergence_constant =
            entries.windows(2).map(|w| (w[1].value - w[0].value).abs() / (1.0 / w[0].r - 1.0 / w[1].r).abs()).fold(0.0, f64::max);
        EnergyReport {
            route,
            kernel: *kernel,
            entries,
            extrapolated,
            extrapolation_error,
            extrapolated_stderr: None,
            convergence_constant,
            singular_replicas: 0,
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.r).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    /// `sigmas` standard errors plus the extrapolation error.
    pub fn uncertainty(&self, sigmas: f64) -> f64 {
        sigmas * self.extrapolated_stderr.unwrap_or(0.0) + self.extrapolation_error
    }

    /// Apply this report's extrapolation functional to another ladder of
    /// values on the same radii. For the pair-sum route this is the weighted
    /// `1/R` fit, which makes cross-route comparisons free of fit bias.
    pub fn refit(&self, values: &[f64]) -> Result<f64> {
        ensure!(values.len() == self.entries.len(), Argument, "ladder length mismatch");
        let rs = self.radii();
        match self.route {
            EnergyRoute::PairSumMc => {
                let cov = diagonal(&self.entries.iter().map(|e| e.stderr.unwrap_or(1.0).powi(2)).collect::<Vec<_>>());
                Ok(weighted_intercept(&rs, values, &cov)?.0)
            }
            _ => Ok(richardson(&rs, values, &correction_basis(&self.kernel))?.0),
        }
    }
}

fn diagonal(v: &[f64]) -> Vec<Vec<f64>> {
    (0..v.len()).map(|i| (0..v.len()).map(|j| if i == j { v[i] } else { 0.0 }).collect()).collect()
}

/// Background integrals of the cube of side `side`.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundIntegrals {
    kernel: Kernel,
    side: f64,
    pub bb: f64,
}

impl BackgroundIntegrals {
    pub fn new(kernel: &Kernel, side: f64) -> Self {
        BackgroundIntegrals { kernel: *kernel, side, bb: background_background(kernel, side) }
    }

    /// `int_{C_R} g(p - y) dy`, `p` relative to the cube center.
    pub fn pb(&self, p: &[f64]) -> f64 {
        point_background(&self.kernel, p, self.side)
    }
}

fn check_ladder(r_list: &[f64]) -> Result<()> {
    ensure!(!r_list.is_empty(), Argument, "empty R ladder");
    ensure!(r_list.iter().all(|r| *r > 0.0 && r.is_finite()), Argument, "R values must be positive");
    ensure!(r_list.windows(2).all(|w| w[0] < w[1]), Argument, "R ladder must be strictly increasing");
    Ok(())
}

/// `H^int_R` from centred coordinates of the points in `C_R`.
fn hint_centered(pts: &[f64], d: usize, r: f64, kernel: &Kernel, bb: f64) -> Result<f64> {
    let n = pts.len() / d;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let p = &pts[i * d..(i + 1) * d];
        let mut acc = 0.0;
        for j in i + 1..n {
            let q = &pts[j * d..(j + 1) * d];
            let dist2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist2 == 0.0 {
                return Err(Error::Singularity(format!("coincident points at {p:?}")));
            }
            acc += kernel.radial(dist2.sqrt());
        }
        rows.push(acc);
    }
    let pb: Vec<f64> = pts.chunks(d).map(|p| point_background(kernel, p, r)).collect();
    Ok(2.0 * pairwise_sum(&rows) - 2.0 * pairwise_sum(&pb) + bb)
}

/// Interaction of (configuration minus unit background) with itself in the
/// centred cube `C_R`, diagonal excluded.
pub fn hint_r(config: &PointConfiguration, r: f64, kernel: &Kernel) -> Result<f64> {
    ensure!(
        config.dim() == kernel.dim(),
        Argument,
        "kernel dimension {} differs from configuration dimension {}",
        kernel.dim(),
        config.dim()
    );
    ensure!(r > 0.0 && r <= config.window().side(), Domain, "R = {r} must lie in (0, {}]", config.window().side());
    let pts = config.centered_points_in(r);
    hint_centered(&pts, config.dim(), r, kernel, background_background(kernel, r))
}

/// `E[H^int_R] / R^d` along `r_list` from `n_replicas` samples, one sample
/// per replica on the largest window with nested centred sub-windows.
pub fn wint_monte_carlo(model: &ProcessModel, kernel: &Kernel, r_list: &[f64], n_replicas: usize, seed: u64) -> Result<EnergyReport> {
    check_ladder(r_list)?;
    ensure!(model.dim() == kernel.dim(), Argument, "kernel dimension {} differs from model dimension {}", kernel.dim(), model.dim());
    ensure!(n_replicas >= 30, Argument, "at least 30 replicas are required, got {n_replicas}");
    let d = model.dim();
    let window = Window::centered(d, *r_list.last().unwrap())?;
    let bbs: Vec<f64> = r_list.iter().map(|r| background_background(kernel, *r)).collect();
    let per_replica: Vec<Result<Option<Vec<f64>>>> = par::map_indexed(n_replicas, |i| {
        let config = sample(model, &window, Seed::new(seed, i as u64))?;
        let mut row = Vec::with_capacity(r_list.len());
        for (r, bb) in r_list.iter().zip(&bbs) {
            let pts = config.centered_points_in(*r);
            match hint_centered(&pts, d, *r, kernel, *bb) {
                Ok(h) => row.push(h / r.powi(d as i32)),
                Err(Error::Singularity(_)) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        Ok(Some(row))
    });
    let mut rows = Vec::with_capacity(n_replicas);
    let mut singular = 0;
    for r in per_replica {
        match r? {
            Some(row) => rows.push(row),
            None => singular += 1,
        }
    }
    ensure!(singular * 100 <= n_replicas, Singularity, "{singular} of {n_replicas} replicas had coincident points");
    let entries: Vec<EnergyEntry> = (0..r_list.len())
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|row| row[j]).collect();
            let (m, se) = mean_stderr(&col);
            EnergyEntry { r: r_list[j], value: m, stderr: Some(se) }
        })
        .collect();
    let cov = covariance_of_means(&rows);
    let means: Vec<f64> = entries.iter().map(|e| e.value).collect();
    let (est, se) = if r_list.len() >= 2 { weighted_intercept(r_list, &means, &cov)? } else { (means[0], cov[0][0].sqrt()) };
    // largest of the drift over the top three radii and the shift caused by
    // adding the lattice-type correction term to the fit
    let drift = if r_list.len() >= 4 {
        let k = r_list.len() - 3;
        let sub: Vec<Vec<f64>> = cov[k..].iter().map(|row| row[k..].to_vec()).collect();
        let top = (weighted_intercept(&r_list[k..], &means[k..], &sub)?.0 - est).abs();
        let basis: Vec<_> = correction_basis(kernel).into_iter().take(3).collect();
        let variances: Vec<f64> = (0..r_list.len()).map(|i| cov[i][i]).collect();
        let model = (weighted_basis_intercept(r_list, &means, &variances, &basis)? - est).abs();
        top.max(model)
    } else {
        0.0
    };
    let mut report = EnergyReport::new(EnergyRoute::PairSumMc, kernel, entries, est, drift);
    report.extrapolated_stderr = Some(se);
    report.singular_replicas = singular;
    Ok(report)
}

/// `int_a^b g(v) t^n dv` with `t = v - a`.
fn shifted_moment(kernel: &Kernel, n: usize, a: f64, b: f64) -> f64 {
    if a == 0.0 {
        return kernel.moment(n as i32, 0.0, b);
    }
    if a <= b - a {
        let mut total = 0.0;
        let mut binom = 1.0;
        for j in (0..=n).rev() {
            // binom = C(n, j)
            total += binom * (-a).powi((n - j) as i32) * kernel.moment(j as i32, a, b);
            binom = binom * j as f64 / (n - j + 1) as f64;
        }
        return total;
    }
    let (x, w) = rule(16);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(w).map(|(xi, wi)| wi * kernel.radial(c + h * xi) * (h * (1.0 + xi)).powi(n as i32)).sum::<f64>() * h
}

/// `int_a^b g(v) q(v - a) w(v) dv` where `w` is the tent `R - v` or 1.
fn poly_integral(kernel: &Kernel, a: f64, b: f64, q: &[f64], tent: Option<f64>) -> f64 {
    let coeffs: Vec<f64> = match tent {
        None => q.to_vec(),
        Some(r) => {
            // q(t) * ((r - a) - t)
            let mut out = vec![0.0; q.len() + 1];
            for (i, c) in q.iter().enumerate() {
                out[i] += c * (r - a);
                out[i + 1] -= c;
            }
            out
        }
    };
    coeffs.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(n, c)| c * shifted_moment(kernel, n, a, b)).sum()
}

fn segment_integral(kernel: &Kernel, rho2: &Rho2Analytic, seg: &Segment, tent: Option<f64>) -> Result<f64> {
    match seg {
        Segment::Poly(p) => Ok(poly_integral(kernel, p.a, p.b, &p.coeffs, tent)),
        Segment::Func { a, b, singular } => {
            let w = |v: f64| tent.map_or(1.0, |r| r - v);
            let abs_tol = 1e-13 * tent.unwrap_or(1.0).max(1.0);
            let f = |v: f64| kernel.radial(v) * (rho2.continuous(&[v]) - 1.0) * w(v);
            match singular {
                Some(theta) => {
                    let alpha = if kernel.is_log() { *theta } else { theta - kernel.s() };
                    ensure!(alpha > 0.0, Diverging, "g(v) rho_2(v) ~ v^({theta} - 1 - {}) is not integrable at 0", kernel.s());
                    debug_assert_eq!(*a, 0.0);
                    let top = b.powf(alpha);
                    adaptive(|t: f64| f(t.powf(1.0 / alpha)) * t.powf(1.0 / alpha - 1.0) / alpha, 0.0, top, abs_tol, 1e-12)
                }
                None => adaptive(f, *a, *b, abs_tol, 1e-12),
            }
        }
    }
}

fn monomial_product(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, x) in p.iter().enumerate() {
        for (j, y) in q.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Tent-weighted energy at a single R:
/// `R^{-d} int_{[-R,R]^d} g(v) (rho_2(v) - 1) prod (R - |v_i|) dv`.
pub fn wint_at(rho2: &Rho2Analytic, kernel: &Kernel, r: f64) -> Result<f64> {
    let d = rho2.dim();
    ensure!(d == kernel.dim(), Argument, "kernel dimension {} differs from correlation dimension {d}", kernel.dim());
    ensure!(r > 0.0, Argument, "R must be positive");
    if rho2.is_poisson() {
        return Ok(0.0);
    }
    if d == 1 {
        let parts = rho2.segments_1d(r).iter().map(|s| segment_integral(kernel, rho2, s, Some(r))).collect::<Result<Vec<f64>>>()?;
        let atoms: Vec<f64> =
            rho2.atoms(r).iter().filter(|(p, _)| p[0].abs() < r).map(|(p, m)| m * kernel.radial(p[0].abs()) * (r - p[0].abs())).collect();
        return Ok((2.0 * pairwise_sum(&parts) + pairwise_sum(&atoms)) / r);
    }
    let vol = r.powi(d as i32);
    if let Some((len, p, scale)) = rho2.product_form() {
        let l = len.min(r);
        let factor = monomial_product(&p, &[r, -1.0]);
        let factors = vec![factor; d];
        return Ok((1u32 << d) as f64 * scale * background::cube_polynomial_integral(kernel, l, &factors) / vol);
    }
    if rho2.has_atoms() {
        let atoms: Vec<f64> = rho2
            .atoms(r)
            .iter()
            .filter(|(p, _)| p.iter().all(|x| x.abs() < r))
            .map(|(p, m)| m * kernel.eval(p).expect("nonzero atom") * p.iter().map(|x| r - x.abs()).product::<f64>())
            .collect();
        return Ok((pairwise_sum(&atoms) - background_background(kernel, r)) / vol);
    }
    Err(Error::NotApplicable(format!("no quadrature for this correlation in dimension {d}")))
}

/// Quadrature route: the tent-weighted energy of an analytic `rho_2` along
/// `r_list`, extrapolated by generalized Richardson.
pub fn wint_from_rho2(rho2: &Rho2Analytic, kernel: &Kernel, r_list: &[f64]) -> Result<EnergyReport> {
    check_ladder(r_list)?;
    let tail = rho2.tail_residual();
    ensure!(!tail.is_finite() || tail <= 1e-6, Diverging, "rho_2 - 1 has not decayed at the end of its tabulation (residual {tail:e})");
    let values = par::map_slice(r_list, |r| wint_at(rho2, kernel, *r)).into_iter().collect::<Result<Vec<f64>>>()?;
    let entries = r_list.iter().zip(&values).map(|(r, v)| EnergyEntry { r: *r, value: *v, stderr: None }).collect();
    let (est, err) = if values.len() >= 2 { richardson(r_list, &values, &correction_basis(kernel))? } else { (values[0], f64::INFINITY) };
    Ok(EnergyReport::new(EnergyRoute::Rho2Quadrature, kernel, entries, est, err))
}

/// `sum_{k=1}^{floor R} psi_R(k) - int_0^R psi_R` with
/// `psi_R(x) = (2/R) g(x) (R - x)`.
pub fn lattice_series_at(kernel: &Kernel, r: f64) -> f64 {
    let terms: Vec<f64> = (1..=r.floor() as u64).map(|k| kernel.radial(k as f64) * (r - k as f64)).collect();
    let integral = r * kernel.moment(0, 0.0, r) - kernel.moment(1, 0.0, r);
    2.0 / r * (pairwise_sum(&terms) - integral)
}

/// Lattice energy through the one-dimensional psi series.
pub fn wint_lattice_series(kernel: &Kernel, r_list: &[f64]) -> Result<EnergyReport> {
    check_ladder(r_list)?;
    ensure!(kernel.dim() == 1, Argument, "the lattice series is one-dimensional");
    let values = par::map_slice(r_list, |r| lattice_series_at(kernel, *r));
    let entries = r_list.iter().zip(&values).map(|(r, v)| EnergyEntry { r: *r, value: *v, stderr: None }).collect();
    let (est, err) = if values.len() >= 2 { richardson(r_list, &values, &correction_basis(kernel))? } else { (values[0], f64::INFINITY) };
    Ok(EnergyReport::new(EnergyRoute::LatticeSeries, kernel, entries, est, err))
}

/// `int_{|v| <= v_max} -log|v| (rho_2(v) - 1) dv` without tent weight. The
/// Borodin-Serfaty energy is this quantity up to an additive constant, which
/// is fixed to zero here; only differences between processes are meaningful.
pub fn wbs_energy(rho2: &Rho2Analytic, kernel: &Kernel, v_max: f64) -> Result<f64> {
    ensure!(kernel.is_log(), NotApplicable, "the Borodin-Serfaty energy is defined for logarithmic kernels");
    ensure!(rho2.dim() == kernel.dim(), Argument, "dimension mismatch");
    ensure!(v_max > 0.0, Argument, "v_max must be positive");
    ensure!(!rho2.has_atoms(), NotApplicable, "rho_2 with atoms does not decay");
    let support = rho2.support_radius().ok_or_else(|| Error::NotApplicable("rho_2 - 1 does not decay".into()))?;
    if rho2.is_poisson() {
        return Ok(0.0);
    }
    let top = support.min(v_max);
    if rho2.dim() == 1 {
        let parts = rho2.segments_1d(top).iter().map(|s| segment_integral(kernel, rho2, s, None)).collect::<Result<Vec<f64>>>()?;
        return Ok(2.0 * pairwise_sum(&parts));
    }
    let (len, p, scale) = rho2.product_form().ok_or_else(|| Error::NotApplicable("no product form for this correlation".into()))?;
    let factors = vec![p; rho2.dim()];
    Ok((1u32 << rho2.dim()) as f64 * scale * background::cube_polynomial_integral(kernel, len.min(v_max), &factors))
}

#[cfg(test)]
mod tests;
