//! Monte Carlo estimators on replica samples: pair correlation, number
//! variance, the logarithmic discrepancy term and total-variation bounds.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::generators::{sample_replicas, ProcessModel};
use crate::geometry::{PointConfiguration, Window};
use crate::kernel::Kernel;
use crate::par;
use crate::stats::{fit_line, mean_stderr, pairwise_sum};

/// Uniform binning of separations: signed `[-v_max, v_max]` in one
/// dimension, radial `[0, v_max]` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub v_max: f64,
    pub n_bins: usize,
}

/// Binned estimate of `rho_2 - 1` (bin averages).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub d: usize,
    pub radial: bool,
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_replicas: usize,
}

impl CorrelationEstimate {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

fn shell_volume(d: usize, a: f64, b: f64) -> f64 {
    match d {
        2 => PI * (b * b - a * a),
        3 => 4.0 / 3.0 * PI * (b.powi(3) - a.powi(3)),
        _ => 2.0 * (b - a),
    }
}

/// Tent-corrected pair histogram: every ordered pair of distinct points
/// with separation `v` adds `1 / (bin volume * prod (R - |v_i|))` to the bin
/// of `v`; subtracting 1 gives an unbiased estimate of the bin average of
/// `rho_2 - 1`.
pub fn estimate_rho2(samples: &[PointConfiguration], bins: &BinSpec) -> Result<CorrelationEstimate> {
    ensure!(samples.len() >= 2, Insufficient, "standard errors need at least two replicas, got {}", samples.len());
    ensure!(bins.n_bins >= 1, Argument, "need at least one bin");
    let d = samples[0].dim();
    let r = samples[0].window().side();
    ensure!(samples.iter().all(|s| s.dim() == d && s.window().side() == r), Argument, "replicas must share dimension and window size");
    ensure!(bins.v_max > 0.0 && bins.v_max < r, Domain, "v_max = {} must lie in (0, R = {r})", bins.v_max);
    let radial = d > 1;
    let n = bins.n_bins;
    let lo = if radial { 0.0 } else { -bins.v_max };
    let bw = (bins.v_max - lo) / n as f64;
    let edges: Vec<f64> = (0..=n).map(|i| lo + i as f64 * bw).collect();
    let vols: Vec<f64> = if radial { edges.windows(2).map(|w| shell_volume(d, w[0], w[1])).collect() } else { vec![bw; n] };

    let per_replica: Vec<Vec<f64>> = par::map_slice(samples, |cfg| {
        let mut hist = vec![0.0; n];
        let c = cfg.coords();
        let m = cfg.len();
        if d == 1 {
            for i in 0..m {
                for j in i + 1..m {
                    let v = c[j] - c[i];
                    if v >= bins.v_max {
                        break;
                    }
                    if v == 0.0 {
                        continue;
                    }
                    let w = 1.0 / (r - v);
                    for sv in [v, -v] {
                        let b = (((sv - lo) / bw) as usize).min(n - 1);
                        hist[b] += w;
                    }
                }
            }
        } else {
            for i in 0..m {
                for j in i + 1..m {
                    let (p, q) = (&c[i * d..(i + 1) * d], &c[j * d..(j + 1) * d]);
                    let dist = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    if dist >= bins.v_max || dist == 0.0 {
                        continue;
                    }
                    let tent: f64 = p.iter().zip(q).map(|(a, b)| r - (a - b).abs()).product();
                    let b = ((dist / bw) as usize).min(n - 1);
                    hist[b] += 2.0 / tent;
                }
            }
        }
        hist.iter().zip(&vols).map(|(h, v)| h / v - 1.0).collect()
    });
    let mut values = Vec::with_capacity(n);
    let mut stderr = Vec::with_capacity(n);
    for b in 0..n {
        let col: Vec<f64> = per_replica.iter().map(|row| row[b]).collect();
        let (m, se) = mean_stderr(&col);
        values.push(m);
        stderr.push(se);
    }
    Ok(CorrelationEstimate { d, radial, edges, values, stderr, n_replicas: samples.len() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceEntry {
    #[serde(rename = "R")]
    pub r: f64,
    pub var: f64,
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceCurve {
    pub entries: Vec<VarianceEntry>,
    /// Log-log slope with a 95% interval; absent when fewer than two
    /// variances are positive (e.g. the lattice at integer R).
    pub fitted_exponent: Option<ExponentFit>,
}

fn check_ladder(r_list: &[f64]) -> Result<()> {
    let mut distinct = r_list.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    ensure!(distinct.len() >= 2, Insufficient, "degenerate fit: fewer than two distinct R");
    ensure!(r_list.windows(2).all(|w| w[0] < w[1]), Argument, "R list must be strictly increasing");
    ensure!(r_list[0] > 0.0, Argument, "R must be positive");
    Ok(())
}

/// Squared discrepancies `D_R^2` for every replica and every R (nested
/// centred sub-windows of one sample per replica).
fn squared_discrepancies(model: &ProcessModel, r_list: &[f64], n_replicas: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let d = model.dim();
    let window = Window::centered(d, *r_list.last().unwrap())?;
    let samples = sample_replicas(model, &window, seed, n_replicas)?;
    Ok(par::map_slice(&samples, |c| {
        r_list
            .iter()
            .map(|r| {
                let n = c.centered_points_in(*r).len() / d;
                (n as f64 - r.powi(d as i32)).powi(2)
            })
            .collect()
    }))
}

fn exponent_fit(entries: &[VarianceEntry]) -> Option<ExponentFit> {
    let pos: Vec<&VarianceEntry> = entries.iter().filter(|e| e.var > 0.0).collect();
    let xs: Vec<f64> = pos.iter().map(|e| e.r.ln()).collect();
    let ys: Vec<f64> = pos.iter().map(|e| e.var.ln()).collect();
    let fit = fit_line(&xs, &ys).ok()?;
    let half = 1.96 * fit.slope_stderr;
    Some(ExponentFit { exponent: fit.slope, ci_low: fit.slope - half, ci_high: fit.slope + half })
}

/// `E[D_R^2]` along `r_list` with the fitted growth exponent.
pub fn number_variance_curve(model: &ProcessModel, r_list: &[f64], n_replicas: usize, seed: u64) -> Result<VarianceCurve> {
    check_ladder(r_list)?;
    ensure!(r_list.len() >= 4, Argument, "need at least four R values, got {}", r_list.len());
    ensure!(r_list.last().unwrap() / r_list[0] >= 10.0, Argument, "R list must span at least one decade");
    ensure!(n_replicas >= 2, Insufficient, "need at least two replicas");
    let rows = squared_discrepancies(model, r_list, n_replicas, seed)?;
    let entries: Vec<VarianceEntry> = (0..r_list.len())
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let (m, se) = mean_stderr(&col);
            VarianceEntry { r: r_list[j], var: m, stderr: se }
        })
        .collect();
    let fitted_exponent = exponent_fit(&entries);
    Ok(VarianceCurve { entries, fitted_exponent })
}

/// Both sides of `iint (rho_2 - 1) = E[D_R^2] - R^d` from the same counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// `E[N(N-1)] - R^{2d}`.
    pub lhs: f64,
    /// `E[N^2] - 2 R^d E[N] + R^{2d} - R^d`.
    pub rhs: f64,
    /// `rhs - lhs - statistical_gap`; zero up to rounding.
    pub algebraic_gap: f64,
    /// `(E[N] - R^d)(1 - 2 R^d)`: what the intensity-one assumption absorbs.
    pub statistical_gap: f64,
}

pub fn discrepancy_identity_check(samples: &[PointConfiguration], r: f64) -> Result<IdentityCheck> {
    ensure!(samples.len() >= 2, Insufficient, "need at least two replicas");
    let d = samples[0].dim();
    ensure!(samples.iter().all(|s| r <= s.window().side()), Domain, "R = {r} exceeds a sample window");
    let counts: Vec<u64> = samples.iter().map(|s| (s.centered_points_in(r).len() / d) as u64).collect();
    let n = counts.len() as f64;
    let s1: u64 = counts.iter().sum();
    let s2: u64 = counts.iter().map(|c| c * c).sum();
    let en = s1 as f64 / n;
    let en2 = s2 as f64 / n;
    let enn1 = (s2 - s1) as f64 / n;
    let vol = r.powi(d as i32);
    let lhs = enn1 - vol * vol;
    let rhs = en2 - 2.0 * vol * en + vol * vol - vol;
    let statistical_gap = (en - vol) * (1.0 - 2.0 * vol);
    Ok(IdentityCheck { lhs, rhs, algebraic_gap: rhs - lhs - statistical_gap, statistical_gap })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DlogTrend {
    BoundedToZero,
    BoundedToPositive,
    Diverging,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DlogEntry {
    #[serde(rename = "R")]
    pub r: f64,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DlogCurve {
    pub c_log: f64,
    pub entries: Vec<DlogEntry>,
    pub last_decade_slope: Option<f64>,
    pub trend: DlogTrend,
}

/// Classify a positive sequence by its log-log slope over the last decade
/// of R: above 0.1 diverging, below -0.1 vanishing, otherwise bounded away
/// from zero. An identically zero sequence vanishes.
pub fn classify_trend(rs: &[f64], values: &[f64]) -> (Option<f64>, DlogTrend) {
    let r_top = *rs.last().unwrap();
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        rs.iter().zip(values).filter(|(r, v)| **r >= r_top / 10.0 * (1.0 - 1e-12) && **v > 0.0).map(|(r, v)| (r.ln(), v.ln())).unzip();
    match fit_line(&xs, &ys) {
        Ok(fit) => {
            let trend = if fit.slope > 0.1 {
                DlogTrend::Diverging
            } else if fit.slope < -0.1 {
                DlogTrend::BoundedToZero
            } else {
                DlogTrend::BoundedToPositive
            };
            (Some(fit.slope), trend)
        }
        Err(_) if values.iter().all(|v| *v == 0.0) => (None, DlogTrend::BoundedToZero),
        Err(_) => (None, DlogTrend::BoundedToPositive),
    }
}

/// The sequence `C_log (E[D_R^2] / R^d) log R` whose limsup is the
/// logarithmic discrepancy term.
pub fn dlog_estimate(model: &ProcessModel, kernel: &Kernel, r_list: &[f64], n_replicas: usize, seed: u64, c_log: f64) -> Result<DlogCurve> {
    ensure!(kernel.is_log(), NotApplicable, "the logarithmic discrepancy term is only defined for log kernels");
    ensure!(kernel.dim() == model.dim(), Argument, "dimension mismatch");
    check_ladder(r_list)?;
    ensure!(n_replicas >= 2, Insufficient, "need at least two replicas");
    let d = model.dim() as i32;
    let rows = squared_discrepancies(model, r_list, n_replicas, seed)?;
    let entries: Vec<DlogEntry> = (0..r_list.len())
        .map(|j| {
            let r = r_list[j];
            let f = c_log * r.ln() / r.powi(d);
            let col: Vec<f64> = rows.iter().map(|row| row[j] * f).collect();
            let (m, se) = mean_stderr(&col);
            DlogEntry { r, value: m, stderr: se }
        })
        .collect();
    let values: Vec<f64> = entries.iter().map(|e| e.value).collect();
    let (last_decade_slope, trend) = classify_trend(r_list, &values);
    Ok(DlogCurve { c_log, entries, last_decade_slope, trend })
}

/// Count-vector total variation between two sample sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvEstimate {
    pub tv_lower: f64,
    /// `1/2 sum_x (sd(p_hat(x)) + sd(q_hat(x)))`, a scale for the sampling
    /// error of `tv_lower`.
    pub mc_error: f64,
    pub distinct_outcomes: usize,
    /// Set when the histograms have more than one distinct count vector per
    /// five samples, so the empirical TV is dominated by sampling noise.
    pub sparse: bool,
}

fn count_vector(cfg: &PointConfiguration, r: f64, per_axis: usize) -> Vec<u32> {
    let d = cfg.dim();
    let pts = cfg.centered_points_in(r);
    let mut counts = vec![0u32; per_axis.pow(d as u32)];
    let width = r / per_axis as f64;
    for p in pts.chunks(d) {
        let mut idx = 0;
        for x in p {
            let t = (((x + 0.5 * r) / width) as usize).min(per_axis - 1);
            idx = idx * per_axis + t;
        }
        counts[idx] += 1;
    }
    counts
}

/// Half the L1 distance between the empirical laws of the count vectors
/// over `tile_count` equal tiles of `C_R`. By data processing, this lower
/// bounds the total variation of the restrictions to `C_R` (up to sampling
/// error).
pub fn tv_lower_bound(
    samples_p: &[PointConfiguration],
    samples_q: &[PointConfiguration],
    window_r: f64,
    tile_count: usize,
) -> Result<TvEstimate> {
    ensure!(!samples_p.is_empty() && !samples_q.is_empty(), Insufficient, "empty sample set");
    ensure!(tile_count >= 1, Argument, "tile_count must be positive");
    let d = samples_p[0].dim();
    let per_axis = (tile_count as f64).powf(1.0 / d as f64).round() as usize;
    ensure!(per_axis.pow(d as u32) == tile_count, Argument, "tile_count {tile_count} is not a perfect power of d = {d}");
    ensure!(
        samples_p.iter().chain(samples_q).all(|s| s.dim() == d && s.window().side() >= window_r),
        Domain,
        "every sample window must contain C_R"
    );
    let hist = |ss: &[PointConfiguration]| {
        let mut h: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for s in ss {
            *h.entry(count_vector(s, window_r, per_axis)).or_default() += 1.0;
        }
        h
    };
    let (hp, hq) = (hist(samples_p), hist(samples_q));
    let (np, nq) = (samples_p.len() as f64, samples_q.len() as f64);
    let mut keys: Vec<&Vec<u32>> = hp.keys().chain(hq.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut diffs = Vec::with_capacity(keys.len());
    let mut errs = Vec::with_capacity(keys.len());
    for k in &keys {
        let p = hp.get(*k).copied().unwrap_or(0.0) / np;
        let q = hq.get(*k).copied().unwrap_or(0.0) / nq;
        diffs.push((p - q).abs());
        errs.push((p * (1.0 - p) / np).sqrt() + (q * (1.0 - q) / nq).sqrt());
    }
    let distinct = keys.len();
    Ok(TvEstimate {
        tv_lower: (0.5 * pairwise_sum(&diffs)).min(1.0),
        mc_error: 0.5 * pairwise_sum(&errs),
        distinct_outcomes: distinct,
        sparse: distinct as f64 > (np.min(nq)) / 5.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvReport {
    pub tv_lower: f64,
    pub pinsker_upper: f64,
    pub window_r: f64,
    pub mc_error: f64,
    pub satisfied: bool,
}

/// Specific Pinsker bound `TV <= sqrt(ERS / 2) R^{d/2}` on `C_R`, checked
/// against a TV lower bound allowing for its sampling error.
pub fn pinsker_check(ers: f64, tv_lower: f64, mc_error: f64, r: f64, d: usize) -> Result<TvReport> {
    ensure!(ers >= 0.0, Argument, "specific relative entropy must be non-negative, got {ers}");
    ensure!(r > 0.0, Argument, "R must be positive");
    ensure!(mc_error >= 0.0, Argument, "MC error must be non-negative");
    let pinsker_upper = (ers / 2.0).sqrt() * r.powf(d as f64 / 2.0);
    Ok(TvReport { tv_lower, pinsker_upper, window_r: r, mc_error, satisfied: tv_lower - mc_error <= pinsker_upper })
}
