//! Discretized minimization of `int g T2` over correlation deficits with
//! `T2 >= -1` and `T2^ >= -1`.
//!
//! `T2` is even, piecewise constant on the cells `[j h, (j + 1) h)` of
//! `[0, v_max)` and zero beyond. Its transform is sampled by the midpoint
//! Riemann sum `T2^(xi_k) = 2 h sum_j T_j cos(2 pi xi_k (j + 1/2) h)` on
//! `xi_k = k / (4 v_max)`, which is a DCT-II of the values zero-padded to
//! twice their length.
//!
//! For logarithmic kernels the energy is only finite on hyperuniform
//! candidates, so the solver also pins `T2^(0) = 2 h sum_j T_j = -1`; without
//! it any positive-definite bump placed where `g < 0` lowers the objective
//! without bound.

use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::kernel::Kernel;

const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub v_max: f64,
    pub h: f64,
    /// Tent parameter of the objective weight `1 - |v| / R`.
    #[serde(rename = "R")]
    pub r: f64,
    pub n_cells: usize,
}

impl Discretization {
    /// Grid on `[0, v_max]` with step `h` and tent parameter `R = v_max`.
    pub fn new(v_max: f64, h: f64) -> Result<Self> {
        Self::with_tent(v_max, h, v_max)
    }

    /// As [`Discretization::new`] with a tent parameter `r >= v_max`.
    pub fn with_tent(v_max: f64, h: f64, r: f64) -> Result<Self> {
        ensure!(h > 0.0 && h.is_finite(), Argument, "grid step must be positive, got {h}");
        ensure!(v_max > 0.0 && v_max.is_finite(), Argument, "v_max must be positive, got {v_max}");
        let n = (v_max / h).round();
        ensure!((n * h - v_max).abs() <= 1e-9 * v_max && n >= 2.0, Argument, "v_max = {v_max} must be a multiple (>= 2) of h = {h}");
        ensure!(r >= v_max, Argument, "tent parameter R = {r} must be at least v_max = {v_max}");
        Ok(Discretization { v_max, h, r, n_cells: n as usize })
    }

    /// Length of the zero-padded transform.
    pub fn padded_len(&self) -> usize {
        2 * self.n_cells
    }

    /// Cell midpoints.
    pub fn grid(&self) -> Vec<f64> {
        (0..self.n_cells).map(|j| (j as f64 + 0.5) * self.h).collect()
    }

    pub fn freq_grid(&self) -> Vec<f64> {
        let dxi = 1.0 / (4.0 * self.v_max);
        (0..self.padded_len()).map(|k| k as f64 * dxi).collect()
    }

    /// `2 int_{cell j} g(v) (1 - v / R) dv`, in closed form.
    pub fn cell_weights(&self, kernel: &Kernel) -> Result<Vec<f64>> {
        ensure!(kernel.dim() == 1, Argument, "the explorer is one-dimensional, got kernel {kernel}");
        Ok((0..self.n_cells)
            .map(|j| {
                let (a, b) = (j as f64 * self.h, (j + 1) as f64 * self.h);
                2.0 * (kernel.moment(0, a, b) - kernel.moment(1, a, b) / self.r)
            })
            .collect())
    }

    /// The hardcore deficit `-1` on `[0, 1/2)` (cells entirely inside).
    pub fn hardcore(&self) -> Vec<f64> {
        (0..self.n_cells).map(|j| if ((j + 1) as f64) * self.h <= 0.5 + 1e-12 { -1.0 } else { 0.0 }).collect()
    }
}

/// Sampled transform and its exact inverse on one discretization.
struct Transform {
    plan: Arc<dyn TransformType2And3<f64>>,
    n_cells: usize,
    h: f64,
    scratch: Vec<f64>,
}

impl Transform {
    fn new(disc: &Discretization) -> Self {
        let plan = DctPlanner::new().plan_dct2(disc.padded_len());
        let scratch = vec![0.0; plan.get_scratch_len()];
        Transform { plan, n_cells: disc.n_cells, h: disc.h, scratch }
    }

    fn len(&self) -> usize {
        2 * self.n_cells
    }

    fn forward(&mut self, values: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(values);
        out.resize(self.len(), 0.0);
        self.plan.process_dct2_with_scratch(out, &mut self.scratch);
        let s = 2.0 * self.h;
        out.iter_mut().for_each(|x| *x *= s);
    }

    /// Inverse of `forward` on the padded domain (padding included).
    fn inverse(&mut self, hat: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(hat);
        self.plan.process_dct3_with_scratch(out, &mut self.scratch);
        // dct3(dct2(x)) = x * len / 2
        let s = 1.0 / (self.h * self.len() as f64);
        out.iter_mut().for_each(|x| *x *= s);
    }
}

/// Sampled transform `T2^(xi_k)` of a candidate.
pub fn transform(values: &[f64], disc: &Discretization) -> Result<Vec<f64>> {
    ensure!(values.len() == disc.n_cells, Argument, "expected {} values, got {}", disc.n_cells, values.len());
    let mut out = Vec::new();
    Transform::new(disc).forward(values, &mut out);
    Ok(out)
}

/// Inverse of [`transform`] on the padded domain: returns `2 n_cells`
/// values whose first `n_cells` are the cell values.
pub fn inverse_transform(hat: &[f64], disc: &Discretization) -> Result<Vec<f64>> {
    ensure!(hat.len() == disc.padded_len(), Argument, "expected {} frequencies, got {}", disc.padded_len(), hat.len());
    let mut out = Vec::new();
    Transform::new(disc).inverse(hat, &mut out);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateT2 {
    pub values: Vec<f64>,
    pub objective: f64,
    pub feasible_direct: bool,
    pub feasible_fourier: bool,
    pub max_violation: f64,
    /// Bound on `|d T2^ / d xi|`; the transform may dip below its sampled
    /// minimum by at most this times half the frequency step.
    pub fourier_lipschitz: f64,
    /// `T2^(0)`; equals -1 on hyperuniform candidates.
    pub zero_frequency: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

struct Evaluator {
    weights: Vec<f64>,
    tr: Transform,
    hat: Vec<f64>,
    disc: Discretization,
}

impl Evaluator {
    fn new(disc: &Discretization, kernel: &Kernel) -> Result<Self> {
        Ok(Evaluator { weights: disc.cell_weights(kernel)?, tr: Transform::new(disc), hat: Vec::new(), disc: *disc })
    }

    fn objective(&self, values: &[f64]) -> f64 {
        crate::stats::pairwise_sum(&values.iter().zip(&self.weights).map(|(t, w)| t * w).collect::<Vec<_>>())
    }

    /// (direct violation, Fourier violation)
    fn violations(&mut self, values: &[f64]) -> (f64, f64) {
        let direct = values.iter().map(|t| -1.0 - t).fold(0.0, f64::max);
        self.tr.forward(values, &mut self.hat);
        let fourier = self.hat.iter().map(|t| -1.0 - t).fold(0.0, f64::max);
        (direct, fourier)
    }

    fn candidate(&mut self, values: Vec<f64>) -> CandidateT2 {
        let (vd, vf) = self.violations(&values);
        let h = self.disc.h;
        let lip = 4.0 * std::f64::consts::PI * h * values.iter().enumerate().map(|(j, t)| (j as f64 + 0.5) * h * t.abs()).sum::<f64>();
        CandidateT2 {
            objective: self.objective(&values),
            feasible_direct: vd <= FEASIBILITY_TOL,
            feasible_fourier: vf <= FEASIBILITY_TOL,
            max_violation: vd.max(vf),
            fourier_lipschitz: lip,
            zero_frequency: 2.0 * h * values.iter().sum::<f64>(),
            r: self.disc.r,
            values,
        }
    }
}

/// Objective and feasibility of a candidate deficit given on the cells.
pub fn evaluate_candidate(values: &[f64], disc: &Discretization, kernel: &Kernel) -> Result<CandidateT2> {
    ensure!(values.len() == disc.n_cells, Argument, "expected {} values, got {}", disc.n_cells, values.len());
    ensure!(values.iter().all(|v| v.is_finite()), Argument, "candidate values must be finite");
    Ok(Evaluator::new(disc, kernel)?.candidate(values.to_vec()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant {
        step: f64,
    },
    /// `step / sqrt(t + 1)`.
    InverseSqrt {
        step: f64,
    },
}

impl StepSchedule {
    fn at(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Constant { step } => step,
            StepSchedule::InverseSqrt { step } => step / ((t + 1) as f64).sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        let s = match *self {
            StepSchedule::Constant { step } | StepSchedule::InverseSqrt { step } => step,
        };
        ensure!(s > 0.0 && s.is_finite(), Argument, "step size must be positive, got {s}");
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub iterations: usize,
    /// Step in units of the cell values: the move of the largest weight.
    pub schedule: StepSchedule,
    pub dykstra_max: usize,
    pub dykstra_tol: f64,
    /// Restrict to `T2^(0) = -1`; `None` pins exactly for log kernels.
    pub pin_zero_frequency: Option<bool>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            iterations: 200,
            schedule: StepSchedule::InverseSqrt { step: 0.5 },
            dykstra_max: 500,
            dykstra_tol: 1e-10,
            pin_zero_frequency: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub best: CandidateT2,
    /// Objective of the best feasible iterate after each step.
    pub best_trace: Vec<f64>,
    /// Violation left by the projection loop at each step, before rescaling.
    pub violation_trace: Vec<f64>,
    pub hardcore_objective: f64,
}

/// Projected gradient descent on the linear objective. Each step projects
/// onto the feasible set by Dykstra's alternating projections, then moves
/// toward a strictly feasible anchor just far enough to remove the residual
/// Fourier violation.
pub fn minimize_t2(disc: &Discretization, kernel: &Kernel, options: &SolverOptions) -> Result<SolverResult> {
    ensure!(options.iterations >= 1, Argument, "iterations must be at least 1");
    ensure!(options.dykstra_max >= 1, Argument, "dykstra_max must be at least 1");
    options.schedule.validate()?;
    let pin = options.pin_zero_frequency.unwrap_or(kernel.is_log());
    let mut ev = Evaluator::new(disc, kernel)?;
    let n = disc.n_cells;
    let wmax = ev.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    ensure!(wmax > 0.0, Argument, "kernel weights vanish on the grid");

    // flat over the support: its transform stays well above -1 off zero
    let anchor = vec![if pin { -1.0 / (2.0 * disc.v_max) } else { 0.0 }; n];
    let mut anchor_hat = Vec::new();
    ev.tr.forward(&anchor, &mut anchor_hat);
    let admissible = |c: &CandidateT2| c.max_violation <= FEASIBILITY_TOL && (!pin || (c.zero_frequency + 1.0).abs() <= FEASIBILITY_TOL);

    let hardcore = ev.candidate(disc.hardcore());
    let start = ev.candidate(anchor.clone());
    let mut best = if admissible(&hardcore) && hardcore.objective < start.objective { hardcore.clone() } else { start };
    let mut x = best.values.clone();
    let mut best_trace = Vec::with_capacity(options.iterations);
    let mut violation_trace = Vec::with_capacity(options.iterations);
    let mut proj = Projector::new(disc, pin);
    let mut hat = Vec::new();
    for t in 0..options.iterations {
        let eta = options.schedule.at(t) / wmax;
        let z: Vec<f64> = x.iter().zip(&ev.weights).map(|(xi, w)| xi - eta * w).collect();
        let y = proj.project(&z, options.dykstra_max, options.dykstra_tol);
        ev.tr.forward(&y, &mut hat);
        // y satisfies the direct constraints exactly; pull toward the anchor
        let mut lam: f64 = 0.0;
        let mut viol: f64 = 0.0;
        for (k, (yk, ak)) in hat.iter().zip(&anchor_hat).enumerate() {
            let v = -1.0 - yk;
            if v > 0.0 && !(pin && k == 0) {
                viol = viol.max(v);
                lam = lam.max(v / (v + (ak + 1.0)));
            }
        }
        violation_trace.push(viol);
        let settled = viol < 1e-2 && lam < 0.5;
        if !settled {
            return Err(Error::NonConvergence {
                iterations: t + 1,
                detail: format!(
                    "projection left Fourier violation {viol:e}; recent violations {:?}",
                    &violation_trace[violation_trace.len().saturating_sub(5)..]
                ),
            });
        }
        let y: Vec<f64> = y.iter().zip(&anchor).map(|(v, a)| (1.0 - lam) * v + lam * a).collect();
        let cand = ev.candidate(y);
        if admissible(&cand) && cand.objective < best.objective {
            best = cand.clone();
        }
        best_trace.push(best.objective);
        x = cand.values;
    }
    Ok(SolverResult { best, best_trace, violation_trace, hardcore_objective: hardcore.objective })
}

/// Dykstra projection onto the direct set (`T >= -1` on the cells, zero on
/// the padding, optionally `2 h sum T = -1`) intersected with `{T^ >= -1}`,
/// in the orthonormal coordinates of the padded domain.
struct Projector {
    tr: Transform,
    n_cells: usize,
    h: f64,
    pin: bool,
    buf: Vec<f64>,
    hat: Vec<f64>,
}

impl Projector {
    fn new(disc: &Discretization, pin: bool) -> Self {
        Projector { tr: Transform::new(disc), n_cells: disc.n_cells, h: disc.h, pin, buf: Vec::new(), hat: Vec::new() }
    }

    fn project_direct(&self, v: &mut [f64]) {
        let (cells, pad) = v.split_at_mut(self.n_cells);
        pad.iter_mut().for_each(|x| *x = 0.0);
        if self.pin {
            project_capped_sum(cells, -1.0 / (2.0 * self.h));
        } else {
            cells.iter_mut().for_each(|x| *x = x.max(-1.0));
        }
    }

    /// The forward map is a positive multiple of an orthogonal map on each
    /// coordinate, so clipping the transform is the Euclidean projection.
    fn project_fourier(&mut self, v: &mut [f64]) {
        self.tr.forward(v, &mut self.hat);
        self.hat.iter_mut().for_each(|x| *x = x.max(-1.0));
        self.tr.inverse(&self.hat, &mut self.buf);
        v.copy_from_slice(&self.buf);
    }

    /// Returns a point of the direct set.
    fn project(&mut self, z: &[f64], max_iter: usize, tol: f64) -> Vec<f64> {
        let m = 2 * self.n_cells;
        let mut x: Vec<f64> = z.to_vec();
        x.resize(m, 0.0);
        let mut p = vec![0.0; m];
        let mut q = vec![0.0; m];
        let mut y = vec![0.0; m];
        let mut xn = vec![0.0; m];
        for _ in 0..max_iter {
            for i in 0..m {
                y[i] = x[i] + p[i];
            }
            self.project_direct(&mut y);
            for i in 0..m {
                p[i] += x[i] - y[i];
                xn[i] = y[i] + q[i];
            }
            self.project_fourier(&mut xn);
            let mut change: f64 = 0.0;
            for i in 0..m {
                q[i] += y[i] - xn[i];
                change = change.max((xn[i] - x[i]).abs());
            }
            std::mem::swap(&mut x, &mut xn);
            if change < tol {
                break;
            }
        }
        y.truncate(self.n_cells);
        y
    }
}

/// Euclidean projection onto `{t >= -1, sum t = total}`: `t_j = max(z_j -
/// tau, -1)` with `tau` fixed by the sum.
fn project_capped_sum(z: &mut [f64], total: f64) {
    let n = z.len();
    let mut sorted: Vec<f64> = z.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut head = 0.0;
    let mut tau = f64::NAN;
    for m in 1..=n {
        head += sorted[m - 1];
        // top m entries free, the rest at -1
        let t = (head - (n - m) as f64 - total) / m as f64;
        let next_ok = m == n || sorted[m] - t <= -1.0;
        if sorted[m - 1] - t > -1.0 && next_ok {
            tau = t;
            break;
        }
    }
    debug_assert!(tau.is_finite(), "sum {total} below the floor {}", -(n as f64));
    z.iter_mut().for_each(|x| *x = (*x - tau).max(-1.0));
}

#[cfg(test)]
mod tests;
