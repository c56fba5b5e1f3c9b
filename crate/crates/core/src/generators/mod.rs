//! Samplers for the stationary processes studied here and their two-point
//! correlation functions.

mod gap;
pub(crate) mod rho2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::geometry::{PointConfiguration, Window};
use crate::par;

pub use gap::GapLaw;
pub use rho2::{gamma_renewal_density, rho2_analytic, tabulate_renewal, Piece, Rho2Analytic, Rho2Options, Segment};

/// Process variant; every variant has intensity one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProcessKind {
    Poisson,
    Lattice,
    /// Exactly `k^d` uniform points in each cube of side `k`, randomly shifted.
    BernoulliBlock {
        k: u32,
    },
    /// `m + V_m` with `V_m` uniform on `[-1/k, 1/k]`, randomly shifted.
    VibratingLattice {
        k: u32,
    },
    Renewal {
        gap: GapLaw,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct ProcessModel {
    kind: ProcessKind,
    d: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ModelRepr {
    Poisson {
        d: usize,
    },
    Lattice {
        d: usize,
    },
    BernoulliBlock {
        k: u32,
        d: usize,
    },
    VibratingLattice {
        k: u32,
        #[serde(default = "one")]
        d: usize,
    },
    Renewal {
        gap: GapLaw,
        #[serde(default = "one")]
        d: usize,
    },
}

fn one() -> usize {
    1
}

impl TryFrom<ModelRepr> for ProcessModel {
    type Error = crate::Error;
    fn try_from(r: ModelRepr) -> Result<Self> {
        match r {
            ModelRepr::Poisson { d } => ProcessModel::new(ProcessKind::Poisson, d),
            ModelRepr::Lattice { d } => ProcessModel::new(ProcessKind::Lattice, d),
            ModelRepr::BernoulliBlock { k, d } => ProcessModel::new(ProcessKind::BernoulliBlock { k }, d),
            ModelRepr::VibratingLattice { k, d } => ProcessModel::new(ProcessKind::VibratingLattice { k }, d),
            ModelRepr::Renewal { gap, d } => ProcessModel::new(ProcessKind::Renewal { gap }, d),
        }
    }
}

impl From<ProcessModel> for ModelRepr {
    fn from(m: ProcessModel) -> Self {
        let d = m.d;
        match m.kind {
            ProcessKind::Poisson => ModelRepr::Poisson { d },
            ProcessKind::Lattice => ModelRepr::Lattice { d },
            ProcessKind::BernoulliBlock { k } => ModelRepr::BernoulliBlock { k, d },
            ProcessKind::VibratingLattice { k } => ModelRepr::VibratingLattice { k, d },
            ProcessKind::Renewal { gap } => ModelRepr::Renewal { gap, d },
        }
    }
}

impl ProcessModel {
    pub fn new(kind: ProcessKind, d: usize) -> Result<Self> {
        ensure!((1..=3).contains(&d), Argument, "dimension must be 1, 2 or 3, got {d}");
        match kind {
            ProcessKind::BernoulliBlock { k } => ensure!(k >= 1, Argument, "block side must be at least 1"),
            ProcessKind::VibratingLattice { k } => {
                ensure!(d == 1, Argument, "vibrating lattice is one-dimensional");
                ensure!(k >= 1, Argument, "vibration parameter must be at least 1");
            }
            ProcessKind::Renewal { gap } => {
                ensure!(d == 1, Argument, "renewal processes are one-dimensional");
                gap.validate()?;
            }
            ProcessKind::Poisson | ProcessKind::Lattice => {}
        }
        Ok(ProcessModel { kind, d })
    }

    pub fn poisson(d: usize) -> Self {
        Self::new(ProcessKind::Poisson, d).expect("valid dimension")
    }

    pub fn lattice(d: usize) -> Self {
        Self::new(ProcessKind::Lattice, d).expect("valid dimension")
    }

    pub fn bernoulli_block(k: u32, d: usize) -> Result<Self> {
        Self::new(ProcessKind::BernoulliBlock { k }, d)
    }

    pub fn vibrating_lattice(k: u32) -> Result<Self> {
        Self::new(ProcessKind::VibratingLattice { k }, 1)
    }

    pub fn renewal(gap: GapLaw) -> Result<Self> {
        Self::new(ProcessKind::Renewal { gap }, 1)
    }

    pub fn kind(&self) -> ProcessKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// True when the number variance grows slower than the volume.
    pub fn is_hyperuniform(&self) -> bool {
        matches!(self.kind, ProcessKind::Lattice | ProcessKind::BernoulliBlock { .. } | ProcessKind::VibratingLattice { .. })
    }

    /// Short label used in file headers.
    pub fn label(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }
}

/// Master seed plus replica index; each pair owns an independent stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    pub master: u64,
    pub replica: u64,
}

impl Seed {
    pub fn new(master: u64, replica: u64) -> Self {
        Seed { master, replica }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.replica);
        rng
    }
}

/// Draw one configuration of `model` inside `window`.
pub fn sample(model: &ProcessModel, window: &Window, seed: Seed) -> Result<PointConfiguration> {
    ensure!(model.dim() == window.dim(), Argument, "model dimension {} differs from window dimension {}", model.dim(), window.dim());
    let mut rng = seed.rng();
    let d = model.dim();
    let mut coords = match model.kind {
        ProcessKind::Poisson => poisson_points(window, &mut rng),
        ProcessKind::Lattice => {
            let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            lattice_points(window, &shift)
        }
        ProcessKind::BernoulliBlock { k } => {
            let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * k as f64).collect();
            return Ok(bernoulli_block_with_shift(k, window, &shift, &mut rng));
        }
        ProcessKind::VibratingLattice { k } => vibrating_points(k, window, &mut rng),
        ProcessKind::Renewal { gap } => renewal_points(&gap, window, &mut rng),
    };
    if d == 1 {
        coords.sort_by(f64::total_cmp);
    }
    Ok(PointConfiguration::from_sorted_unchecked(window.clone(), coords))
}

/// `n` replicas with seeds `(master, 0..n)`, generated in parallel.
pub fn sample_replicas(model: &ProcessModel, window: &Window, master: u64, n: usize) -> Result<Vec<PointConfiguration>> {
    par::map_indexed(n, |i| sample(model, window, Seed::new(master, i as u64))).into_iter().collect()
}

fn poisson_points<R: Rng>(window: &Window, rng: &mut R) -> Vec<f64> {
    let d = window.dim();
    let n = Poisson::new(window.volume()).expect("positive volume").sample(rng) as usize;
    let mut out = Vec::with_capacity(n * d);
    for _ in 0..n {
        for a in 0..d {
            let x = window.lower(a) + rng.random::<f64>() * window.side();
            out.push(x.min(window.upper(a)));
        }
    }
    out
}

/// Integer offsets `m` with `lo <= shift + m * step <= hi`, widened by `pad`.
fn index_range(lo: f64, hi: f64, shift: f64, step: f64, pad: f64) -> std::ops::RangeInclusive<i64> {
    (((lo - pad - shift) / step).floor() as i64)..=(((hi + pad - shift) / step).ceil() as i64)
}

/// Cartesian product over axes of per-axis coordinate lists.
fn product(axes: &[Vec<f64>]) -> Vec<f64> {
    let d = axes.len();
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    if axes.iter().any(|a| a.is_empty()) {
        return out;
    }
    loop {
        for (a, i) in idx.iter().enumerate() {
            out.push(axes[a][*i]);
        }
        let mut a = d;
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < axes[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }
}

fn lattice_points(window: &Window, shift: &[f64]) -> Vec<f64> {
    let axes: Vec<Vec<f64>> = (0..window.dim())
        .map(|a| {
            let (lo, hi) = (window.lower(a), window.upper(a));
            index_range(lo, hi, shift[a], 1.0, 0.0).map(|m| shift[a] + m as f64).filter(|x| *x >= lo && *x <= hi).collect()
        })
        .collect();
    product(&axes)
}

/// Bernoulli-block sample for a given tile shift: tiles
/// `shift + k * (m + [0,1)^d)`, each holding `k^d` uniform points, clipped to
/// the window.
pub fn bernoulli_block_with_shift<R: Rng>(k: u32, window: &Window, shift: &[f64], rng: &mut R) -> PointConfiguration {
    let d = window.dim();
    let kf = k as f64;
    let per_tile = (k as usize).pow(d as u32);
    let tiles: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            let r = index_range(window.lower(a), window.upper(a), shift[a], kf, kf);
            r.map(|m| shift[a] + m as f64 * kf).collect()
        })
        .collect();
    let corners = product(&tiles);
    let mut out = Vec::new();
    let mut p = vec![0.0; d];
    for corner in corners.chunks(d) {
        for _ in 0..per_tile {
            for a in 0..d {
                p[a] = corner[a] + kf * rng.random::<f64>();
            }
            if window.contains(&p) {
                out.extend_from_slice(&p);
            }
        }
    }
    if d == 1 {
        out.sort_by(f64::total_cmp);
    }
    PointConfiguration::from_sorted_unchecked(window.clone(), out)
}

fn vibrating_points<R: Rng>(k: u32, window: &Window, rng: &mut R) -> Vec<f64> {
    let (lo, hi) = (window.lower(0), window.upper(0));
    let u: f64 = rng.random();
    let w = 1.0 / k as f64;
    let mut out = Vec::new();
    for m in index_range(lo, hi, u, 1.0, w) {
        let x = u + m as f64 + rng.random_range(-w..=w);
        if x >= lo && x <= hi {
            out.push(x);
        }
    }
    out
}

/// Stationary renewal sample: the first point after the left edge sits at
/// `U * X*` with `X*` length-biased, which is the exact forward recurrence
/// law; subsequent gaps are i.i.d.
fn renewal_points<R: Rng>(gap: &GapLaw, window: &Window, rng: &mut R) -> Vec<f64> {
    let (lo, hi) = (window.lower(0), window.upper(0));
    let mut out = Vec::new();
    let mut x = lo + rng.random::<f64>() * gap.sample_size_biased(rng);
    while x <= hi {
        out.push(x);
        x += gap.sample(rng);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::discrepancy;
    use crate::stats::mean_stderr;
    use proptest::prelude::*;

    fn models_1d() -> Vec<ProcessModel> {
        vec![
            ProcessModel::poisson(1),
            ProcessModel::lattice(1),
            ProcessModel::bernoulli_block(3, 1).unwrap(),
            ProcessModel::vibrating_lattice(4).unwrap(),
            ProcessModel::renewal(GapLaw::Gamma { shape: 0.5 }).unwrap(),
            ProcessModel::renewal(GapLaw::Gamma { shape: 4.0 }).unwrap(),
            ProcessModel::renewal(GapLaw::UniformHat { k: 2 }).unwrap(),
        ]
    }

    #[test]
    fn lattice_count_is_exact() {
        let w = Window::centered(1, 7.0).unwrap();
        for r in 0..50 {
            let c = sample(&ProcessModel::lattice(1), &w, Seed::new(3, r)).unwrap();
            assert_eq!(c.len(), 7);
        }
    }

    #[test]
    fn block_tile_holds_k_points() {
        let w = Window::centered(1, 30.0).unwrap();
        let mut rng = Seed::new(5, 0).rng();
        let c = bernoulli_block_with_shift(3, &w, &[0.4], &mut rng);
        let inside = c.coords().iter().filter(|x| **x >= 0.4 && **x < 3.4).count();
        assert_eq!(inside, 3);
        // 2d: an interior tile holds k^2 points
        let w2 = Window::centered(2, 12.0).unwrap();
        let c2 = bernoulli_block_with_shift(2, &w2, &[0.5, 1.5], &mut rng);
        let inside = c2.points().filter(|p| (0.5..2.5).contains(&p[0]) && (1.5..3.5).contains(&p[1])).count();
        assert_eq!(inside, 4);
    }

    #[test]
    fn poisson_2d_mean_count() {
        let w = Window::centered(2, 10.0).unwrap();
        let counts: Vec<f64> = sample_replicas(&ProcessModel::poisson(2), &w, 9, 10_000).unwrap().iter().map(|c| c.len() as f64).collect();
        let (m, se) = mean_stderr(&counts);
        assert!((m - 100.0).abs() < 3.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn intensity_is_one_for_every_model() {
        let mut models = models_1d();
        models.push(ProcessModel::bernoulli_block(2, 2).unwrap());
        models.push(ProcessModel::lattice(3));
        for model in models {
            let d = model.dim();
            let side = if d == 1 { 40.0 } else { 8.0 };
            let w = Window::centered(d, side).unwrap();
            let counts: Vec<f64> = sample_replicas(&model, &w, 17, 2000).unwrap().iter().map(|c| c.len() as f64 / w.volume()).collect();
            let (m, se) = mean_stderr(&counts);
            let band = 3.0 * se.max(1e-3 / w.volume().sqrt());
            assert!((m - 1.0).abs() < band.max(2e-3), "{model:?}: intensity {m} ± {se}");
        }
    }

    #[test]
    fn renewal_edges_are_unbiased() {
        // stationarity: the intensity near the window edge equals the bulk one
        let model = ProcessModel::renewal(GapLaw::Gamma { shape: 0.25 }).unwrap();
        let w = Window::centered(1, 20.0).unwrap();
        let samples = sample_replicas(&model, &w, 23, 20_000).unwrap();
        let edge: Vec<f64> = samples.iter().map(|c| c.coords().iter().filter(|x| **x < -9.0).count() as f64).collect();
        let (m, se) = mean_stderr(&edge);
        assert!((m - 1.0).abs() < 4.0 * se, "edge intensity {m} ± {se}");
    }

    #[test]
    fn lattice_rigidity() {
        let w = Window::centered(1, 100.0).unwrap();
        let c = sample(&ProcessModel::lattice(1), &w, Seed::new(1, 1)).unwrap();
        for len in [0.5, 1.0, 2.7, 13.2] {
            for start in [-40.0, -11.3, 3.25] {
                let n = c.coords().iter().filter(|x| **x >= start && **x <= start + len).count() as f64;
                assert!(n >= f64::floor(len) && n <= f64::ceil(len) + 1.0, "len {len} start {start} count {n}");
            }
        }
    }

    #[test]
    fn vibrating_points_stay_near_sites() {
        let w = Window::centered(1, 50.0).unwrap();
        let c = sample(&ProcessModel::vibrating_lattice(8).unwrap(), &w, Seed::new(2, 0)).unwrap();
        let xs = c.coords();
        for pair in xs.windows(2) {
            let g = pair[1] - pair[0];
            assert!((0.75 - 1e-12..=1.25 + 1e-12).contains(&g), "gap {g}");
        }
    }

    #[test]
    fn errors() {
        assert!(ProcessModel::new(ProcessKind::VibratingLattice { k: 2 }, 2).is_err());
        assert!(ProcessModel::new(ProcessKind::Renewal { gap: GapLaw::Exponential }, 3).is_err());
        assert!(ProcessModel::new(ProcessKind::BernoulliBlock { k: 0 }, 1).is_err());
        let w = Window::centered(2, 4.0).unwrap();
        assert!(sample(&ProcessModel::poisson(1), &w, Seed::new(0, 0)).is_err());
        assert!(Window::centered(1, 0.0).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let m = ProcessModel::renewal(GapLaw::Gamma { shape: 2.5 }).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"type":"renewal","gap":{"law":"gamma","shape":2.5},"d":1}"#);
        let back: ProcessModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let b: ProcessModel = serde_json::from_str(r#"{"type":"bernoulli_block","k":4,"d":2}"#).unwrap();
        assert_eq!(b, ProcessModel::bernoulli_block(4, 2).unwrap());
        assert!(serde_json::from_str::<ProcessModel>(r#"{"type":"vibrating_lattice","k":4,"d":2}"#).is_err());
        assert!(serde_json::from_str::<ProcessModel>(r#"{"type":"poisson","d":1,"extra":0}"#).is_err());
        let v: ProcessModel = serde_json::from_str(r#"{"type":"vibrating_lattice","k":4}"#).unwrap();
        assert_eq!(v.dim(), 1);
    }

    #[test]
    fn poisson_second_moment_of_discrepancy() {
        let w = Window::centered(1, 4.0).unwrap();
        let d2: Vec<f64> = sample_replicas(&ProcessModel::poisson(1), &w, 4, 20_000)
            .unwrap()
            .iter()
            .map(|c| discrepancy(c, 4.0).unwrap().discrepancy.powi(2))
            .collect();
        let (m, se) = mean_stderr(&d2);
        assert!((m - 4.0).abs() < 4.0 * se, "E[D^2] = {m} ± {se}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn deterministic_given_seed(master in any::<u64>(), replica in 0u64..1000, which in 0usize..7) {
            let model = models_1d()[which];
            let w = Window::centered(1, 25.0).unwrap();
            let a = sample(&model, &w, Seed::new(master, replica)).unwrap();
            let b = sample(&model, &w, Seed::new(master, replica)).unwrap();
            prop_assert_eq!(a.coords().iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.coords().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
            prop_assert!(a.points().all(|p| w.contains(p)));
        }
    }
}
