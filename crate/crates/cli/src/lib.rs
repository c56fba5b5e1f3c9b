//! Experiment runner: parses a JSON experiment, dispatches to `rieszlab`,
//! writes CSV/JSON outputs and a manifest with their SHA-256 digests.

mod plot;
mod spec;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rieszlab::energy::{wint_from_rho2, wint_lattice_series, wint_monte_carlo, EnergyReport, EnergyRoute};
use rieszlab::estimators::{
    dlog_estimate, estimate_rho2, number_variance_curve, pinsker_check, tv_lower_bound, BinSpec, TvEstimate, TvReport,
};
use rieszlab::generators::{rho2_analytic, sample, sample_replicas, ProcessKind, ProcessModel, Rho2Options, Seed};
use rieszlab::io::{self, to_json_string, CsvTable};
use rieszlab::lpx::{minimize_t2, Discretization, SolverOptions, StepSchedule};
use rieszlab::onedim::{crystallization_gap, free_energy_scan, kth_neighbor_density, renewal_entropy_rate, NeighborDensity, ScanOptions};
use rieszlab::{Kernel, Window};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

pub use plot::emit_plot_script;
pub use spec::{parse_spec, Command, ExperimentSpec, PlotKind};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Invalid experiment; one message per offending key.
    Validation(Vec<String>),
    /// Divergent or non-convergent numerics.
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(errs) => {
                writeln!(f, "invalid experiment:")?;
                for e in errs {
                    writeln!(f, "  {e}")?;
                }
                Ok(())
            }
            CliError::Numerical(m) => writeln!(f, "numerical failure: {m}"),
            CliError::Io(m) => writeln!(f, "I/O failure: {m}"),
        }
    }
}

impl From<rieszlab::Error> for CliError {
    fn from(e: rieszlab::Error) -> Self {
        use rieszlab::Error as E;
        match e {
            E::Diverging(_) | E::NonConvergence { .. } | E::Singularity(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(vec![e.to_string()]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicaErrors {
    pub singular_replicas: usize,
}

/// Deterministic record of a run. Wall time goes to `timing.json` so that
/// identical experiments give identical manifests.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: Command,
    pub spec: ExperimentSpec,
    pub version: String,
    pub replica_errors: ReplicaErrors,
    pub outputs: Vec<OutputDigest>,
}

struct Outputs {
    dir: PathBuf,
    digests: Vec<OutputDigest>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Outputs { dir: dir.to_path_buf(), digests: Vec::new() })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.digests.push(OutputDigest { file: name.into(), sha256: sha256_hex(content.as_bytes()) });
        Ok(())
    }

    fn csv(&mut self, name: &str, t: &CsvTable) -> Result<(), CliError> {
        self.write(name, &t.to_string())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, v: &T) -> Result<(), CliError> {
        self.write(name, &to_json_string(v)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Run a validated experiment, writing every output below `out`.
pub fn run(spec: &ExperimentSpec, out: &Path) -> Result<RunManifest, CliError> {
    let command = spec.command.ok_or_else(|| CliError::Validation(vec!["command: missing".into()]))?;
    let start = Instant::now();
    let mut o = Outputs::new(out)?;
    let mut singular = 0;
    let seed = spec.seed.unwrap_or(0);
    let n = spec.n_replicas.unwrap_or(0);
    match command {
        Command::Generate => {
            let model = spec.model.as_ref().unwrap();
            let window = Window::centered(model.dim(), spec.r.unwrap())?;
            let mut counts = Vec::with_capacity(n);
            for i in 0..n {
                let s = Seed::new(seed, i as u64);
                let cfg = sample(model, &window, s)?;
                counts.push(cfg.len());
                o.csv(&format!("config_{i:04}.csv"), &io::configuration_csv(&cfg, model, s)?)?;
            }
            o.json("generate.json", &json!({ "model": model, "R": spec.r, "seed": seed, "counts": counts }))?;
        }
        Command::Rho2 => {
            let model = spec.model.as_ref().unwrap();
            let window = Window::centered(model.dim(), spec.r.unwrap())?;
            let samples = sample_replicas(model, &window, seed, n)?;
            let est = estimate_rho2(&samples, &BinSpec { v_max: spec.v_max.unwrap(), n_bins: spec.n_bins.unwrap() })?;
            o.csv("rho2.csv", &io::correlation_csv(&est))?;
            o.json("rho2.json", &est)?;
        }
        Command::Variance => {
            let model = spec.model.as_ref().unwrap();
            let rs = spec.r_list.as_ref().unwrap();
            let curve = number_variance_curve(model, rs, n, seed)?;
            o.csv("variance.csv", &io::variance_csv(&curve))?;
            o.json("variance.json", &curve)?;
            if let (Some(k), Some(c)) = (&spec.kernel, spec.c_log) {
                let dl = dlog_estimate(model, k, rs, n, seed, c)?;
                o.csv("dlog.csv", &io::dlog_csv(&dl))?;
                o.json("dlog.json", &dl)?;
            }
        }
        Command::Energy => {
            let report = energy(spec, n, seed)?;
            singular = report.singular_replicas;
            o.csv("energy.csv", &io::energy_csv(&report))?;
            o.json("energy.json", &report)?;
        }
        Command::Neighbors | Command::Crystal => {
            let dens = neighbor_densities(spec, n, seed)?;
            o.csv("neighbors.csv", &io::neighbor_csv(&dens))?;
            let masses: Vec<_> = dens.iter().map(|d| json!({ "k": d.k, "total_mass": d.total_mass })).collect();
            o.json("neighbors.json", &json!({ "L": spec.r, "x_max": spec.x_max, "n_replicas": n, "densities": masses }))?;
            if command == Command::Crystal {
                let g = crystallization_gap(&dens, spec.s_exponent.unwrap(), spec.k_max.unwrap())?;
                o.json("crystal.json", &g)?;
            }
        }
        Command::Freemin => {
            let scan = free_energy_scan(
                spec.beta.unwrap(),
                spec.kernel.as_ref().unwrap(),
                spec.theta_grid.as_ref().unwrap(),
                &ScanOptions::default(),
            )?;
            o.csv("freemin.csv", &io::scan_csv(&scan))?;
            let feasible: Vec<f64> = scan.entries.iter().filter(|e| e.f.is_some()).map(|e| e.theta).collect();
            o.json(
                "freemin.json",
                &json!({
                    "beta": scan.beta,
                    "kernel": scan.kernel,
                    "family": scan.family,
                    "argmin_theta": scan.argmin_theta,
                    "argmin_f": scan.argmin_f,
                    "bracket": scan.bracket,
                    "at_upper_end": scan.at_upper_end,
                    "wint_decreasing": scan.wint_decreasing,
                    "ers_increasing": scan.ers_increasing,
                    "feasible_thetas": feasible,
                }),
            )?;
        }
        Command::Lp => {
            let disc = Discretization::with_tent(spec.v_max.unwrap(), spec.h.unwrap(), spec.r.unwrap())?;
            let opts = SolverOptions {
                iterations: spec.iterations.unwrap(),
                schedule: StepSchedule::InverseSqrt { step: spec.step.unwrap() },
                ..Default::default()
            };
            let res = minimize_t2(&disc, spec.kernel.as_ref().unwrap(), &opts)?;
            let b = &res.best;
            o.csv("lp.csv", &io::candidate_csv(b, &disc))?;
            o.json(
                "lp.json",
                &json!({
                    "objective": b.objective,
                    "feasible_direct": b.feasible_direct,
                    "feasible_fourier": b.feasible_fourier,
                    "max_violation": b.max_violation,
                    "R": b.r,
                    "v_max": disc.v_max,
                    "h": disc.h,
                    "zero_frequency": b.zero_frequency,
                    "fourier_lipschitz": b.fourier_lipschitz,
                    "hardcore_objective": res.hardcore_objective,
                    "iterations": res.best_trace.len(),
                }),
            )?;
        }
        Command::Pinsker => {
            let model = spec.model.as_ref().unwrap();
            let rows = pinsker(model, spec.r_list.as_ref().unwrap(), n, seed, spec.tile_count.unwrap())?;
            o.json("pinsker.json", &rows)?;
        }
        Command::Plot => {
            let script =
                emit_plot_script(spec.kind.unwrap(), Path::new(spec.csv.as_ref().unwrap()), spec.summary.as_deref().map(Path::new))?;
            let name = format!("{}.gp", serde_json::to_value(spec.kind.unwrap()).unwrap().as_str().unwrap());
            o.write(&name, &script)?;
        }
    }
    let manifest = RunManifest {
        command,
        spec: spec.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        replica_errors: ReplicaErrors { singular_replicas: singular },
        outputs: o.digests.clone(),
    };
    let text = to_json_string(&manifest)?;
    let path = out.join("manifest.json");
    fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let timing = to_json_string(&json!({ "wall_time_seconds": start.elapsed().as_secs_f64() }))?;
    let path = out.join("timing.json");
    fs::write(&path, timing).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(manifest)
}

fn energy(spec: &ExperimentSpec, n: usize, seed: u64) -> Result<EnergyReport, CliError> {
    let model = spec.model.as_ref().unwrap();
    let kernel: &Kernel = spec.kernel.as_ref().unwrap();
    let rs = spec.r_list.as_ref().unwrap();
    Ok(match spec.route.unwrap() {
        EnergyRoute::PairSumMc => wint_monte_carlo(model, kernel, rs, n, seed)?,
        EnergyRoute::Rho2Quadrature => wint_from_rho2(&rho2_analytic(model, &Rho2Options::default())?, kernel, rs)?,
        EnergyRoute::LatticeSeries => {
            if model.kind() != ProcessKind::Lattice || model.dim() != 1 {
                return Err(CliError::Validation(vec!["route: lattice_series needs the one-dimensional lattice model".into()]));
            }
            wint_lattice_series(kernel, rs)?
        }
    })
}

fn neighbor_densities(spec: &ExperimentSpec, n: usize, seed: u64) -> Result<Vec<NeighborDensity>, CliError> {
    let model = spec.model.as_ref().unwrap();
    let l = spec.r.unwrap();
    let samples = sample_replicas(model, &Window::centered(1, l)?, seed, n)?;
    (1..=spec.k_max.unwrap()).map(|k| Ok(kth_neighbor_density(&samples, k, l, spec.x_max.unwrap(), spec.n_bins.unwrap())?)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PinskerRow {
    pub ers: f64,
    pub tv: TvEstimate,
    pub report: TvReport,
}

/// Count-vector TV between `model` and Poisson on each `C_R`, checked
/// against the Pinsker bound. Poisson replicas use master seed `seed + 1`.
pub fn pinsker(model: &ProcessModel, r_list: &[f64], n: usize, seed: u64, tile_count: usize) -> Result<Vec<PinskerRow>, CliError> {
    let ers = match model.kind() {
        ProcessKind::Poisson => 0.0,
        ProcessKind::Renewal { gap } => renewal_entropy_rate(&gap)?,
        _ => return Err(CliError::Validation(vec!["model: the entropy rate is available for Poisson and renewal models".into()])),
    };
    let d = model.dim();
    r_list
        .iter()
        .map(|r| {
            let w = Window::centered(d, *r)?;
            let p = sample_replicas(model, &w, seed, n)?;
            let q = sample_replicas(&ProcessModel::poisson(d), &w, seed.wrapping_add(1), n)?;
            let tv = tv_lower_bound(&p, &q, *r, tile_count)?;
            let report = pinsker_check(ers, tv.tv_lower, tv.mc_error, *r, d)?;
            Ok(PinskerRow { ers, tv, report })
        })
        .collect()
}
