//! One-dimensional theory: k-th neighbour correlations, the crystallization
//! gap functional, renewal entropy rates and free-energy scans.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::energy::wint_from_rho2;
use crate::error::{ensure, Error, Result};
use crate::generators::{rho2_analytic, GapLaw, ProcessModel, Rho2Options};
use crate::geometry::PointConfiguration;
use crate::kernel::Kernel;
use crate::par;
use crate::quad::{adaptive, adaptive_to_infinity};
use crate::stats::{fit_line, mean_stderr};

/// Histogram estimate of the k-th neighbour correlation `rho_{2,k}`.
/// Bin `j` is centred at `j * bin_width`; bin 0 is the half bin `[0, w/2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborDensity {
    pub k: usize,
    pub bin_width: f64,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub total_mass: f64,
}

impl NeighborDensity {
    pub fn centers(&self) -> Vec<f64> {
        (0..self.values.len()).map(|j| j as f64 * self.bin_width).collect()
    }

    /// Length of bin `j` inside `[0, infinity)`.
    pub fn bin_length(&self, j: usize) -> f64 {
        if j == 0 {
            0.5 * self.bin_width
        } else {
            self.bin_width
        }
    }

    /// The exact lattice density `delta_k` on this binning.
    pub fn lattice(k: usize, bin_width: f64, n_bins: usize) -> Self {
        let mut values = vec![0.0; n_bins];
        let j = (k as f64 / bin_width).round() as usize;
        let mut total_mass = 0.0;
        if j < n_bins {
            values[j] = 1.0 / if j == 0 { 0.5 * bin_width } else { bin_width };
            total_mass = 1.0;
        }
        NeighborDensity { k, bin_width, values, stderr: vec![0.0; n_bins], total_mass }
    }
}

/// Empirical `rho_{2,k}` on `[0, x_max]` from 1D samples on windows of side
/// `l`. The pair `(x_i, x_{i+k})` (sorted order) contributes
/// `1 / ((l - gap) * bin length)` to the bin of its gap.
pub fn kth_neighbor_density(samples: &[PointConfiguration], k: usize, l: f64, x_max: f64, n_bins: usize) -> Result<NeighborDensity> {
    ensure!(k >= 1, Argument, "neighbour order must be at least 1");
    ensure!(n_bins >= 1, Argument, "need at least one bin");
    ensure!(samples.len() >= 2, Insufficient, "need at least two replicas");
    ensure!(samples.iter().all(|s| s.dim() == 1), Argument, "k-th neighbour densities are one-dimensional");
    ensure!(samples.iter().all(|s| s.window().side() == l), Argument, "every sample window must have side L = {l}");
    let bw = x_max / n_bins as f64;
    let top = (n_bins as f64 - 0.5) * bw;
    ensure!(x_max > 0.0 && top < l, Domain, "x_max = {x_max} must lie in (0, L = {l})");
    let probe = NeighborDensity { k, bin_width: bw, values: vec![], stderr: vec![], total_mass: 0.0 };
    let rows: Vec<Vec<f64>> = par::map_slice(samples, |s| {
        let xs = s.coords();
        let mut hist = vec![0.0; n_bins];
        for i in 0..xs.len().saturating_sub(k) {
            let gap = xs[i + k] - xs[i];
            let j = (gap / bw + 0.5).floor() as usize;
            if j < n_bins {
                hist[j] += 1.0 / ((l - gap) * probe.bin_length(j));
            }
        }
        hist
    });
    let mut values = Vec::with_capacity(n_bins);
    let mut stderr = Vec::with_capacity(n_bins);
    for j in 0..n_bins {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (m, se) = mean_stderr(&col);
        values.push(m);
        stderr.push(se);
    }
    let total_mass = values.iter().enumerate().map(|(j, v)| v * probe.bin_length(j)).sum();
    Ok(NeighborDensity { k, bin_width: bw, values, stderr, total_mass })
}

/// `sum_k int min((x - k)^2 / k^{s+2}, 1) rho_{2,k}(x) dx`, without the
/// proof constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapFunctionalValue {
    pub s_exponent: f64,
    pub k_max: usize,
    pub value: f64,
    /// Conservative: errors of all bins added linearly.
    pub stderr: f64,
    /// Estimate of the omitted `k > k_max` terms plus the mass each
    /// `rho_{2,k}` places beyond the binned range.
    pub truncation_bound: f64,
    pub terms: Vec<f64>,
}

pub fn crystallization_gap(densities: &[NeighborDensity], s_exponent: f64, k_max: usize) -> Result<GapFunctionalValue> {
    ensure!((0.0..1.0).contains(&s_exponent), Argument, "s exponent must lie in [0, 1), got {s_exponent}");
    ensure!(k_max >= 1, Argument, "k_max must be at least 1");
    let mut terms = Vec::with_capacity(k_max);
    let mut stderr = 0.0;
    let mut lost_mass = 0.0;
    for k in 1..=k_max {
        let dens = densities.iter().find(|d| d.k == k).ok_or_else(|| Error::Argument(format!("missing density for k = {k}")))?;
        let kf = k as f64;
        let scale = kf.powf(s_exponent + 2.0);
        let (mut t, mut e) = (0.0, 0.0);
        for (j, (v, se)) in dens.values.iter().zip(&dens.stderr).enumerate() {
            let x = j as f64 * dens.bin_width;
            let w = ((x - kf).powi(2) / scale).min(1.0) * dens.bin_length(j);
            t += w * v;
            e += w * se;
        }
        terms.push(t);
        stderr += e;
        lost_mass += (1.0 - dens.total_mass).max(0.0);
    }
    let value: f64 = terms.iter().sum();
    Ok(GapFunctionalValue { s_exponent, k_max, value, stderr, truncation_bound: power_tail(&terms) + lost_mass, terms })
}

/// Sum over `k > len` of a power law fitted to the last terms; infinite if
/// the fitted decay is not summable.
fn power_tail(terms: &[f64]) -> f64 {
    let n = terms.len();
    let start = n.saturating_sub(n / 2).min(n.saturating_sub(3));
    let (xs, ys): (Vec<f64>, Vec<f64>) = (start..n).filter(|i| terms[*i] > 0.0).map(|i| (((i + 1) as f64).ln(), terms[i].ln())).unzip();
    if terms[start..].iter().all(|t| *t <= 0.0) {
        return 0.0;
    }
    match fit_line(&xs, &ys) {
        Ok(fit) if fit.slope < -1.0 => {
            let p = -fit.slope;
            fit.intercept.exp() * (n as f64).powf(1.0 - p) / (p - 1.0)
        }
        _ => f64::INFINITY,
    }
}

/// `int f log f + 1` for a gap density given by its logarithm on
/// `[lo, hi]` (`hi` may be infinite), after checking that `f` is a
/// probability density with mean one. `singular_exponent = Some(a)` with
/// `a < 1` declares an endpoint behaviour `(x - lo)^(a - 1)`.
pub fn relative_entropy_rate<F: Fn(f64) -> f64>(log_density: F, lo: f64, hi: f64, singular_exponent: Option<f64>) -> Result<f64> {
    ensure!(lo.is_finite() && lo < hi, Argument, "invalid support [{lo}, {hi}]");
    let head_end = if hi.is_finite() { hi } else { lo + 1.0 };
    let integrate = |g: &dyn Fn(f64, f64) -> f64| -> Result<f64> {
        let term = |x: f64| {
            let lf = log_density(x);
            if lf == f64::NEG_INFINITY {
                0.0
            } else {
                g(x, lf)
            }
        };
        let head = match singular_exponent {
            Some(a) if a < 1.0 => {
                let p = 1.0 / a;
                adaptive(|t: f64| term(lo + t.powf(p)) * p * t.powf(p - 1.0), 0.0, (head_end - lo).powf(a), 1e-15, 1e-13)?
            }
            _ => adaptive(term, lo, head_end, 1e-15, 1e-13)?,
        };
        let tail = if hi.is_finite() { 0.0 } else { adaptive_to_infinity(term, head_end, 1e-15, 1e-13)? };
        Ok(head + tail)
    };
    let mass = integrate(&|_, lf| lf.exp())?;
    let mean = integrate(&|x, lf| x * lf.exp())?;
    ensure!((mass - 1.0).abs() < 1e-8, Argument, "gap density has mass {mass}, not 1");
    ensure!((mean - 1.0).abs() < 1e-8, Argument, "gap density has mean {mean}, not 1");
    Ok(integrate(&|_, lf| lf * lf.exp())? + 1.0)
}

/// Per-gap relative entropy of the renewal process against Poisson gaps.
pub fn renewal_entropy_rate(gap: &GapLaw) -> Result<f64> {
    gap.validate()?;
    let (lo, hi) = gap.support();
    match gap {
        GapLaw::Exponential => Ok(0.0),
        GapLaw::Gamma { shape } => {
            let t = *shape;
            let c = t * t.ln() - ln_gamma(t);
            let logf = move |x: f64| if x > 0.0 { c + (t - 1.0) * x.ln() - t * x } else { f64::NEG_INFINITY };
            relative_entropy_rate(logf, lo, hi, Some(t))
        }
        GapLaw::UniformHat { .. } => relative_entropy_rate(|x| gap.density(x).ln(), lo, hi, None),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub theta: f64,
    /// `None` when the energy diverges for this shape.
    pub wint: Option<f64>,
    pub ers: f64,
    pub f: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyScan {
    pub beta: f64,
    pub kernel: Kernel,
    pub family: String,
    pub entries: Vec<ScanEntry>,
    pub argmin_theta: f64,
    pub argmin_f: f64,
    pub bracket: [f64; 2],
    /// True when the minimum sits at the largest feasible grid value.
    pub at_upper_end: bool,
    /// On `theta >= 1`: energy non-increasing and entropy non-decreasing.
    pub wint_decreasing: bool,
    pub ers_increasing: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanOptions {
    pub rho2: Rho2Options,
    /// R ladder used for the tent-weighted energy before extrapolation.
    pub r_ladder: [f64; 3],
    /// Relative width at which golden-section refinement stops.
    pub refine_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { rho2: Rho2Options::default(), r_ladder: [256.0, 512.0, 1024.0], refine_tol: 1e-4 }
    }
}

/// Energy and entropy of the Gamma(theta) renewal process.
pub fn gamma_renewal_terms(kernel: &Kernel, theta: f64, options: &ScanOptions) -> Result<(Option<f64>, f64)> {
    let gap = GapLaw::Gamma { shape: theta };
    let ers = renewal_entropy_rate(&gap)?;
    let rho2 = rho2_analytic(&ProcessModel::renewal(gap)?, &options.rho2)?;
    match wint_from_rho2(&rho2, kernel, &options.r_ladder) {
        Ok(rep) => Ok((Some(rep.extrapolated), ers)),
        Err(Error::Diverging(_)) => Ok((None, ers)),
        Err(e) => Err(e),
    }
}

/// Scan `f(theta) = beta W(theta) + ERS(theta)` over Gamma renewal
/// processes and refine the minimiser by golden section on the bracketing
/// grid interval.
pub fn free_energy_scan(beta: f64, kernel: &Kernel, theta_grid: &[f64], options: &ScanOptions) -> Result<FreeEnergyScan> {
    ensure!(beta > 0.0 && beta.is_finite(), Argument, "beta must be positive, got {beta}");
    ensure!(kernel.dim() == 1, Argument, "free-energy scans run over one-dimensional renewal processes");
    ensure!(theta_grid.len() >= 3, Argument, "theta grid needs at least three points");
    ensure!(theta_grid.iter().all(|t| *t > 0.0), Argument, "theta values must be positive");
    ensure!(theta_grid.windows(2).all(|w| w[0] < w[1]), Argument, "theta grid must be strictly increasing");
    ensure!(theta_grid.contains(&1.0), Argument, "theta grid must contain 1 (the Poisson point)");
    let terms = par::map_slice(theta_grid, |t| gamma_renewal_terms(kernel, *t, options)).into_iter().collect::<Result<Vec<_>>>()?;
    let entries: Vec<ScanEntry> =
        theta_grid.iter().zip(&terms).map(|(t, (w, e))| ScanEntry { theta: *t, wint: *w, ers: *e, f: w.map(|w| beta * w + e) }).collect();
    let feasible: Vec<usize> = (0..entries.len()).filter(|i| entries[*i].f.is_some()).collect();
    ensure!(!feasible.is_empty(), Diverging, "energy diverges on the whole theta grid");
    let best = *feasible.iter().min_by(|a, b| entries[**a].f.unwrap().total_cmp(&entries[**b].f.unwrap())).unwrap();
    let pos = feasible.iter().position(|i| *i == best).unwrap();
    let lo = feasible[pos.saturating_sub(1)];
    let hi = feasible[(pos + 1).min(feasible.len() - 1)];
    let at_upper_end = pos + 1 == feasible.len();
    let (mut argmin_theta, mut argmin_f) = (entries[best].theta, entries[best].f.unwrap());
    if pos > 0 && !at_upper_end {
        let f = |t: f64| -> Result<f64> {
            let (w, e) = gamma_renewal_terms(kernel, t, options)?;
            Ok(w.map_or(f64::INFINITY, |w| beta * w + e))
        };
        let (t, v) = golden_section(f, theta_grid[lo], theta_grid[hi], options.refine_tol)?;
        if v < argmin_f {
            argmin_theta = t;
            argmin_f = v;
        }
    }
    let above: Vec<&ScanEntry> = entries.iter().filter(|e| e.theta >= 1.0 && e.wint.is_some()).collect();
    let wint_decreasing = above.windows(2).all(|w| w[1].wint.unwrap() <= w[0].wint.unwrap() + 1e-10);
    let ers_increasing = above.windows(2).all(|w| w[1].ers >= w[0].ers - 1e-12);
    Ok(FreeEnergyScan {
        beta,
        kernel: *kernel,
        family: "gamma".into(),
        entries,
        argmin_theta,
        argmin_f,
        bracket: [theta_grid[lo], theta_grid[hi]],
        at_upper_end,
        wint_decreasing,
        ers_increasing,
    })
}

/// Golden-section minimisation of a unimodal `f` on `[a, b]` in log scale.
pub fn golden_section<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<(f64, f64)> {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a.ln(), b.ln());
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c.exp())?;
    let mut fd = f(d.exp())?;
    while b - a > rel_tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c.exp())?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d.exp())?;
        }
    }
    Ok(if fc < fd { (c.exp(), fc) } else { (d.exp(), fd) })
}

/// Geometric theta grid `2^{i/steps}` for `i` in `lo..=hi` (contains 1 when
/// `lo <= 0 <= hi`).
pub fn geometric_grid(lo: i32, hi: i32, steps_per_octave: i32) -> Vec<f64> {
    (lo..=hi).map(|i| 2f64.powf(i as f64 / steps_per_octave as f64)).collect()
}
