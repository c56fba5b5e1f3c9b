//! Windows, point configurations and the elementary weights built on them.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::kernel::Kernel;

/// Hypercube of side `side` centred at `center`. The canonical window is
/// centred at the origin, `[-R/2, R/2]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    center: Vec<f64>,
    side: f64,
}

impl Window {
    pub fn centered(d: usize, side: f64) -> Result<Self> {
        Self::new(vec![0.0; d], side)
    }

    pub fn new(center: Vec<f64>, side: f64) -> Result<Self> {
        ensure!(side > 0.0 && side.is_finite(), Argument, "window side must be positive, got {side}");
        ensure!((1..=3).contains(&center.len()), Argument, "dimension must be 1, 2 or 3");
        ensure!(center.iter().all(|c| c.is_finite()), Argument, "window center must be finite");
        Ok(Window { center, side })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim() as i32)
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.center[axis] - 0.5 * self.side
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.center[axis] + 0.5 * self.side
    }

    /// Closed-interval membership with exact comparisons.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(&self.center).all(|(x, c)| *x >= c - 0.5 * self.side && *x <= c + 0.5 * self.side)
    }

    /// Concentric sub-cube of side `side`.
    pub fn sub(&self, side: f64) -> Result<Window> {
        ensure!(side <= self.side, Domain, "sub-window side {side} exceeds window side {}", self.side);
        Window::new(self.center.clone(), side)
    }

    /// Shift the window by `t`.
    pub fn translated(&self, t: &[f64]) -> Window {
        Window { center: self.center.iter().zip(t).map(|(c, s)| c + s).collect(), side: self.side }
    }
}

/// A finite point set inside its window. Coordinates are stored flat; one
/// dimensional configurations are kept sorted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointConfiguration {
    window: Window,
    coords: Vec<f64>,
}

impl PointConfiguration {
    pub fn new(window: Window, mut coords: Vec<f64>) -> Result<Self> {
        let d = window.dim();
        ensure!(coords.len().is_multiple_of(d), Argument, "coordinate buffer length {} is not a multiple of d = {d}", coords.len());
        ensure!(coords.iter().all(|x| !x.is_nan()), Argument, "NaN coordinate");
        for p in coords.chunks(d) {
            ensure!(window.contains(p), Domain, "point {p:?} outside window");
        }
        if d == 1 {
            coords.sort_by(f64::total_cmp);
        }
        Ok(PointConfiguration { window, coords })
    }

    /// Build from generator output that is in the window by construction.
    pub(crate) fn from_sorted_unchecked(window: Window, coords: Vec<f64>) -> Self {
        debug_assert!(coords.chunks(window.dim()).all(|p| window.contains(p)));
        PointConfiguration { window, coords }
    }

    pub fn empty(window: Window) -> Self {
        PointConfiguration { window, coords: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim())
    }

    /// Points inside the concentric sub-cube of side `side`, relative to
    /// the window center.
    pub fn centered_points_in(&self, side: f64) -> Vec<f64> {
        let d = self.dim();
        let half = 0.5 * side;
        let c = self.window.center();
        let mut out = Vec::new();
        for p in self.points() {
            if p.iter().zip(c).all(|(x, ci)| (x - ci).abs() <= half) {
                out.extend(p.iter().zip(c).map(|(x, ci)| x - ci));
            }
        }
        if d == 1 {
            out.sort_by(f64::total_cmp);
        }
        out
    }

    /// True when two points coincide, which makes pair energies infinite.
    pub fn has_duplicates(&self) -> bool {
        let d = self.dim();
        if d == 1 {
            return self.coords.windows(2).any(|w| w[0] == w[1]);
        }
        let mut pts: Vec<&[f64]> = self.points().collect();
        pts.sort_by(|a, b| a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        pts.windows(2).any(|w| w[0] == w[1])
    }

    /// Translate points and window together.
    pub fn translated(&self, t: &[f64]) -> PointConfiguration {
        let d = self.dim();
        let coords = self.coords.iter().enumerate().map(|(i, x)| x + t[i % d]).collect();
        PointConfiguration { window: self.window.translated(t), coords }
    }
}

/// Point count and discrepancy `N_R - R^d` in the centred cube of side R.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyStat {
    pub r: f64,
    pub n: usize,
    pub discrepancy: f64,
}

pub fn discrepancy(config: &PointConfiguration, r: f64) -> Result<DiscrepancyStat> {
    ensure!(r > 0.0, Argument, "side must be positive");
    ensure!(r <= config.window().side(), Domain, "side {r} exceeds window side {}", config.window().side());
    let sub = config.window().sub(r)?;
    let n = config.points().filter(|p| sub.contains(p)).count();
    Ok(DiscrepancyStat { r, n, discrepancy: n as f64 - r.powi(config.dim() as i32) })
}

/// `prod_i (R - |v_i|)`: half the measure of the set of midpoints `x + y`
/// with `x, y` in the cube and `x - y = v`, per coordinate.
pub fn tent_weight(v: &[f64], r: f64) -> Result<f64> {
    ensure!(v.iter().all(|x| x.abs() <= r), Domain, "separation {v:?} exceeds side {r}");
    Ok(v.iter().map(|x| r - x.abs()).product())
}

/// psi_R(x) = (2/R) g(x) (R - x), one dimension.
pub fn psi_weight(kernel: &Kernel, x: f64, r: f64) -> Result<f64> {
    ensure!(kernel.dim() == 1, Argument, "psi weight is one-dimensional");
    ensure!(x > 0.0 && x <= r, Domain, "psi weight needs 0 < x <= R, got x = {x}, R = {r}");
    if x == r {
        return Ok(0.0);
    }
    Ok(2.0 / r * kernel.radial(x) * (r - x))
}
