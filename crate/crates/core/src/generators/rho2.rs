//! Two-point correlation functions of the generator processes.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex64, FftPlanner};
use statrs::function::gamma::ln_gamma;

use super::{GapLaw, ProcessKind, ProcessModel};
use crate::error::{ensure, Result};

/// Grid controls for correlation functions that need tabulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rho2Options {
    /// Grid step for the renewal convolution.
    pub h: f64,
    /// Minimal range of the tabulation.
    pub v_max: f64,
    /// Target size of `|rho_2 - 1|` beyond the tabulated range.
    pub tail_tol: f64,
}

impl Default for Rho2Options {
    fn default() -> Self {
        Rho2Options { h: 1.0 / 256.0, v_max: 32.0, tail_tol: 1e-9 }
    }
}

impl Rho2Options {
    fn validate(&self) -> Result<()> {
        ensure!(self.h > 0.0 && self.h.is_finite(), Argument, "grid step must be positive, got {}", self.h);
        ensure!(self.v_max > self.h, Argument, "v_max must exceed the grid step");
        ensure!(self.tail_tol > 0.0, Argument, "tail tolerance must be positive");
        Ok(())
    }
}

/// Polynomial piece of `rho_2 - 1` on `[a, b]`, coefficients in powers of `v - a`.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub a: f64,
    pub b: f64,
    pub coeffs: Vec<f64>,
}

impl Piece {
    pub fn eval(&self, v: f64) -> f64 {
        let t = v - self.a;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

/// A segment of `rho_2 - 1` on the positive half-line, d = 1.
#[derive(Clone, Debug, PartialEq)]
pub enum Segment {
    Poly(Piece),
    /// Evaluate through [`Rho2Analytic::continuous`]; `singular` carries the
    /// exponent `theta < 1` of an `x^(theta-1)` singularity at `a`.
    Func {
        a: f64,
        b: f64,
        singular: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Poisson,
    Block { k: f64 },
    Lattice,
    Vibrating { k: f64 },
    GammaRenewal { theta: f64, cut: f64 },
    Tabulated { h: f64, minus_one: Vec<f64>, tail: f64 },
    Hardcore,
}

/// Two-point correlation `rho_2(v)` of a stationary process: a continuous
/// density plus, for the lattice, unit atoms at nonzero integer vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Rho2Analytic {
    d: usize,
    repr: Repr,
}

/// Analytic or tabulated `rho_2` for every generator model.
pub fn rho2_analytic(model: &ProcessModel, options: &Rho2Options) -> Result<Rho2Analytic> {
    options.validate()?;
    let d = model.dim();
    let repr = match model.kind() {
        ProcessKind::Poisson => Repr::Poisson,
        ProcessKind::Lattice => Repr::Lattice,
        ProcessKind::BernoulliBlock { k } => Repr::Block { k: k as f64 },
        ProcessKind::VibratingLattice { k } => Repr::Vibrating { k: k as f64 },
        ProcessKind::Renewal { gap } => match gap {
            GapLaw::Exponential => Repr::Poisson,
            GapLaw::Gamma { shape: 1.0 } => Repr::Poisson,
            GapLaw::Gamma { shape } => Repr::GammaRenewal { theta: shape, cut: gamma_cut(shape, options)? },
            GapLaw::UniformHat { .. } => return tabulate_renewal(&gap, options),
        },
    };
    Ok(Rho2Analytic { d, repr })
}

/// Decay rate of `rho_2 - 1` for Gamma(theta) gaps: the rightmost
/// singularity of the Laplace-transformed renewal density.
fn gamma_decay_rate(theta: f64) -> f64 {
    if theta <= 2.0 {
        theta
    } else {
        theta.min(theta * (1.0 - (2.0 * PI / theta).cos()))
    }
}

fn gamma_cut(theta: f64, options: &Rho2Options) -> Result<f64> {
    let gamma = gamma_decay_rate(theta);
    let mut cut = (options.v_max).max((4.0 / options.tail_tol).ln() / gamma + 2.0);
    loop {
        let worst = (0..200)
            .map(|i| cut + i as f64 * 0.005 * cut.min(20.0))
            .map(|v| (gamma_renewal_density(theta, v) - 1.0).abs())
            .fold(0.0, f64::max);
        if worst <= options.tail_tol {
            return Ok(cut);
        }
        ensure!(cut < 1e5, Diverging, "renewal correlation for gamma shape {theta} does not decay");
        cut *= 1.5;
    }
}

/// `sum_j f^{*j}(x)` for Gamma(theta, rate theta) gaps: the j-fold
/// convolution is Gamma(j theta, theta).
pub fn gamma_renewal_density(theta: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return match theta {
            t if t < 1.0 => f64::INFINITY,
            1.0 => 1.0,
            _ => 0.0,
        };
    }
    let y = theta * x;
    let mut sum = 0.0;
    // terms are unimodal in j with the mode near j = x; past it they only shrink
    for j in 1.. {
        let a = j as f64 * theta;
        let term = (ln_gamma_density(a, y) + theta.ln()).exp();
        sum += term;
        if j as f64 > x + 2.0 && term <= 1e-17 * sum {
            break;
        }
    }
    sum
}

/// `ln(y^{a-1} e^{-y} / Gamma(a))` in saddle-point form, free of the
/// cancellation between `a ln y`, `y` and `ln Gamma(a)` at large `a`.
fn ln_gamma_density(a: f64, y: f64) -> f64 {
    let d = y / a - 1.0;
    let deviance = if d.abs() < 0.5 { d - d.ln_1p() } else { d - (y / a).ln() };
    -a * deviance + 0.5 * a.ln() - y.ln() - 0.5 * (2.0 * PI).ln() - stirling_error(a)
}

/// `ln Gamma(a) - (a - 1/2) ln a + a - ln(2 pi) / 2`.
fn stirling_error(a: f64) -> f64 {
    if a < 16.0 {
        return ln_gamma(a) - (a - 0.5) * a.ln() + a - 0.5 * (2.0 * PI).ln();
    }
    let r = 1.0 / (a * a);
    (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r / 1680.0))) / a
}

/// Renewal `rho_2 = sum_j f^{*j}` by iterated FFT convolution of the
/// mean-preserving tent discretization of the gap law.
pub fn tabulate_renewal(gap: &GapLaw, options: &Rho2Options) -> Result<Rho2Analytic> {
    options.validate()?;
    gap.validate()?;
    let h = options.h;
    let var = gap.variance();
    let gamma = 2.0 * PI * PI * var;
    let wanted = (10.0 / options.tail_tol).ln() / gamma;
    let v_max = options.v_max.max(wanted.min(256.0));
    let n = (v_max / h).ceil() as usize;

    // tent masses p_i = E[hat_i(X)] from the cdf and partial mean
    let cell = |i: usize| -> (f64, f64) {
        let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
        let m0 = if gap.support().0 > 0.5 { gap.cdf(b) - gap.cdf(a) } else { gap.sf(a) - gap.sf(b) };
        let m1 = gap.partial_mean(b) - gap.partial_mean(a);
        (m0, m1)
    };
    let mut p = vec![0.0; n + 1];
    for i in 0..n {
        let (m0, m1) = cell(i);
        let a = i as f64 * h;
        let right = (m1 - a * m0) / h;
        p[i] += m0 - right;
        p[i + 1] += right;
    }

    let size = (2 * (n + 1)).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut p_hat: Vec<Complex64> = p.iter().map(|x| Complex64::new(*x, 0.0)).collect();
    p_hat.resize(size, Complex64::new(0.0, 0.0));
    fwd.process(&mut p_hat);

    let mut acc = p.clone();
    let mut cur = p;
    // stop on remaining grid mass; the cap only guards against stalls
    let j_max = (64.0 * v_max).ceil() as usize + 1;
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for _ in 2..=j_max {
        for (b, c) in buf.iter_mut().zip(cur.iter().copied().chain(std::iter::repeat(0.0))) {
            *b = Complex64::new(c, 0.0);
        }
        fwd.process(&mut buf);
        for (b, q) in buf.iter_mut().zip(&p_hat) {
            *b *= q;
        }
        inv.process(&mut buf);
        let scale = 1.0 / size as f64;
        let mut mass = 0.0;
        for (c, b) in cur.iter_mut().zip(&buf) {
            *c = (b.re * scale).max(0.0);
            mass += *c;
        }
        for (a, c) in acc.iter_mut().zip(&cur) {
            *a += c;
        }
        if mass < 1e-15 {
            break;
        }
    }
    let mut minus_one: Vec<f64> = acc.iter().map(|m| m / h - 1.0).collect();
    // the half tent at the origin only resolves the density to O(h);
    // extrapolate from the first interior nodes instead
    minus_one[0] = (2.0 * minus_one[1] - minus_one[2]).max(-1.0);
    let last_unit = (1.0 / h).ceil() as usize;
    let tail = minus_one[n.saturating_sub(last_unit)..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(Rho2Analytic { d: 1, repr: Repr::Tabulated { h, minus_one, tail } })
}

impl Rho2Analytic {
    /// The hardcore candidate `rho_2 = 1 - 1_{|v| < 1/2}`, d = 1.
    pub fn hardcore() -> Self {
        Rho2Analytic { d: 1, repr: Repr::Hardcore }
    }

    /// Piecewise-linear `rho_2 - 1` from node values `minus_one[i]` at `i h`,
    /// zero beyond the last node.
    pub fn tabulated(h: f64, minus_one: Vec<f64>) -> Result<Self> {
        ensure!(h > 0.0 && h.is_finite(), Argument, "grid step must be positive");
        ensure!(minus_one.len() >= 2, Argument, "need at least two nodes");
        ensure!(minus_one.iter().all(|x| x.is_finite() && *x >= -1.0), Argument, "rho_2 must be finite and non-negative");
        let tail = minus_one.last().unwrap().abs();
        Ok(Rho2Analytic { d: 1, repr: Repr::Tabulated { h, minus_one, tail } })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_poisson(&self) -> bool {
        matches!(self.repr, Repr::Poisson)
    }

    /// Density of the continuous part of `rho_2` at `v`.
    pub fn continuous(&self, v: &[f64]) -> f64 {
        let r = || v[0].abs();
        match &self.repr {
            Repr::Poisson => 1.0,
            Repr::Block { k } => 1.0 - v.iter().map(|x| (1.0 - x.abs() / k).max(0.0) / k).product::<f64>(),
            Repr::Lattice => 0.0,
            Repr::Vibrating { k } => {
                let x = r();
                let w = 2.0 / k;
                ((x - w).floor() as i64..=(x + w).ceil() as i64)
                    .filter(|m| *m != 0)
                    .map(|m| ((1.0 - (x - m as f64).abs() / w) / w).max(0.0))
                    .sum()
            }
            Repr::GammaRenewal { theta, .. } => gamma_renewal_density(*theta, r()),
            Repr::Tabulated { h, minus_one, .. } => 1.0 + interp(*h, minus_one, r()),
            Repr::Hardcore => {
                if r() < 0.5 {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Atoms `(location, mass)` with sup-norm at most `radius`.
    pub fn atoms(&self, radius: f64) -> Vec<(Vec<f64>, f64)> {
        if !matches!(self.repr, Repr::Lattice) {
            return Vec::new();
        }
        let m = radius.floor() as i64;
        let axis: Vec<f64> = (-m..=m).map(|i| i as f64).collect();
        let axes = vec![axis; self.d];
        super::product(&axes).chunks(self.d).filter(|p| p.iter().any(|x| *x != 0.0)).map(|p| (p.to_vec(), 1.0)).collect()
    }

    pub fn has_atoms(&self) -> bool {
        matches!(self.repr, Repr::Lattice)
    }

    /// Sup-norm radius beyond which `rho_2 - 1` vanishes (or is truncated);
    /// `None` when it never decays.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.repr {
            Repr::Poisson => Some(0.0),
            Repr::Block { k } => Some(*k),
            Repr::Lattice | Repr::Vibrating { .. } => None,
            Repr::GammaRenewal { cut, .. } => Some(*cut),
            Repr::Tabulated { h, minus_one, .. } => Some(*h * (minus_one.len() - 1) as f64),
            Repr::Hardcore => Some(0.5),
        }
    }

    /// Largest `|rho_2 - 1|` on the last unit before truncation (zero for
    /// exactly compact support).
    pub fn tail_residual(&self) -> f64 {
        match &self.repr {
            Repr::Tabulated { tail, .. } => *tail,
            Repr::GammaRenewal { theta, cut } => (gamma_renewal_density(*theta, *cut) - 1.0).abs(),
            Repr::Lattice | Repr::Vibrating { .. } => f64::INFINITY,
            _ => 0.0,
        }
    }

    /// For product-form `rho_2 - 1 = scale * prod_i p(|v_i|)` on `[-len, len]^d`,
    /// returns `(len, p coefficients, scale)`.
    pub fn product_form(&self) -> Option<(f64, Vec<f64>, f64)> {
        match &self.repr {
            Repr::Poisson => Some((1.0, vec![0.0], 0.0)),
            Repr::Block { k } => Some((*k, vec![1.0, -1.0 / k], -k.powi(-(self.d as i32)))),
            _ => None,
        }
    }

    /// Decomposition of `rho_2 - 1` on `[0, upto]` (d = 1), atoms excluded.
    pub fn segments_1d(&self, upto: f64) -> Vec<Segment> {
        assert_eq!(self.d, 1, "segments are one-dimensional");
        let poly = |a: f64, b: f64, coeffs: Vec<f64>| Segment::Poly(Piece { a, b, coeffs });
        let mut out = Vec::new();
        match &self.repr {
            Repr::Poisson => {}
            Repr::Block { k } => {
                let b = k.min(upto);
                out.push(poly(0.0, b, vec![-1.0 / k, 1.0 / (k * k)]));
            }
            Repr::Hardcore => out.push(poly(0.0, upto.min(0.5), vec![-1.0])),
            Repr::Lattice => out.push(poly(0.0, upto, vec![-1.0])),
            Repr::Vibrating { k } => {
                let w = 2.0 / k;
                let mut knots = vec![0.0, upto];
                let top = (upto + w).ceil() as i64;
                for m in 1..=top {
                    for x in [m as f64 - w, m as f64, m as f64 + w] {
                        if x > 0.0 && x < upto {
                            knots.push(x);
                        }
                    }
                }
                for m in 1..=(w.ceil() as i64) {
                    let x = w - m as f64;
                    if x > 0.0 && x < upto {
                        knots.push(x);
                    }
                }
                knots.sort_by(f64::total_cmp);
                knots.dedup();
                for ab in knots.windows(2) {
                    let (a, b) = (ab[0], ab[1]);
                    if b <= a {
                        continue;
                    }
                    let fa = self.continuous(&[a]) - 1.0;
                    let fb = self.continuous(&[b]) - 1.0;
                    out.push(poly(a, b, vec![fa, (fb - fa) / (b - a)]));
                }
            }
            Repr::Tabulated { h, minus_one, .. } => {
                let n = minus_one.len() - 1;
                for i in 0..n {
                    let a = i as f64 * h;
                    if a >= upto {
                        break;
                    }
                    let b = ((i + 1) as f64 * h).min(upto);
                    out.push(poly(a, b, vec![minus_one[i], (minus_one[i + 1] - minus_one[i]) / h]));
                }
            }
            Repr::GammaRenewal { theta, cut } => {
                let end = cut.min(upto);
                let first = end.min(1.0);
                out.push(Segment::Func { a: 0.0, b: first, singular: (*theta < 1.0).then_some(*theta) });
                let mut a = first;
                while a < end {
                    let b = (a + 1.0).min(end);
                    out.push(Segment::Func { a, b, singular: None });
                    a = b;
                }
            }
        }
        out
    }
}

fn interp(h: f64, nodes: &[f64], x: f64) -> f64 {
    let t = x / h;
    let i = t.floor() as usize;
    if i + 1 >= nodes.len() {
        return if i + 1 == nodes.len() && t == i as f64 { nodes[i] } else { 0.0 };
    }
    let f = t - i as f64;
    nodes[i] * (1.0 - f) + nodes[i + 1] * f
}
