//! Experiment documents: one JSON object per run, validated key by key
//! before anything is computed.

use std::fmt;

use clap::ValueEnum;
use rieszlab::energy::EnergyRoute;
use rieszlab::generators::ProcessModel;
use rieszlab::lpx::Discretization;
use rieszlab::onedim::geometric_grid;
use rieszlab::Kernel;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Generate,
    Rho2,
    Variance,
    Energy,
    Neighbors,
    Crystal,
    Freemin,
    Lp,
    Pinsker,
    Plot,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("unit variant");
        write!(f, "{}", v.as_str().expect("string"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Variance,
    Rho2,
    Energy,
    Freemin,
}

/// A fully resolved experiment. Keys a command does not use stay `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub command: Option<Command>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ProcessModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Kernel>,
    #[serde(rename = "R_list", skip_serializing_if = "Option::is_none")]
    pub r_list: Option<Vec<f64>>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_replicas: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub route: Option<EnergyRoute>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tile_count: Option<usize>,
    #[serde(rename = "C_log", skip_serializing_if = "Option::is_none")]
    pub c_log: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<PlotKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

const SAMPLED: &[&str] = &["model", "n_replicas", "seed"];

fn accepted(command: Command) -> Vec<&'static str> {
    let mut keys = vec!["command"];
    let extra: &[&str] = match command {
        Command::Generate => &["R"],
        Command::Rho2 => &["R", "v_max", "n_bins"],
        Command::Variance => &["R_list", "kernel", "C_log"],
        Command::Energy => &["kernel", "R_list", "route"],
        Command::Neighbors => &["R", "k_max", "x_max", "n_bins"],
        Command::Crystal => &["R", "k_max", "x_max", "n_bins", "s_exponent", "kernel"],
        Command::Freemin => &["kernel", "beta", "theta_grid"],
        Command::Lp => &["kernel", "v_max", "h", "R", "iterations", "step"],
        Command::Pinsker => &["R_list", "tile_count"],
        Command::Plot => &["kind", "csv", "summary"],
    };
    if !matches!(command, Command::Freemin | Command::Lp | Command::Plot) {
        keys.extend_from_slice(SAMPLED);
    }
    keys.extend_from_slice(extra);
    keys
}

fn required(command: Command) -> &'static [&'static str] {
    match command {
        Command::Generate | Command::Rho2 | Command::Variance | Command::Neighbors | Command::Crystal | Command::Pinsker => &["model"],
        Command::Energy => &["model", "kernel"],
        Command::Freemin => &["kernel", "beta"],
        Command::Lp => &["kernel"],
        Command::Plot => &["kind", "csv"],
    }
}

fn take<T: DeserializeOwned>(key: &str, v: &Value, errs: &mut Vec<String>) -> Option<T> {
    match serde_json::from_value(v.clone()) {
        Ok(x) => Some(x),
        Err(e) => {
            errs.push(format!("{key}: {e}"));
            None
        }
    }
}

/// Parse a JSON experiment for `command`, apply flag overrides of top-level
/// scalar keys, fill defaults and validate. All problems are reported
/// together.
pub fn parse_spec(command: Command, doc: &str, overrides: &[(String, Value)]) -> Result<ExperimentSpec, CliError> {
    let root: Value = serde_json::from_str(doc).map_err(|e| CliError::Validation(vec![format!("<document>: {e}")]))?;
    let Value::Object(mut map) = root else {
        return Err(CliError::Validation(vec!["<document>: expected a JSON object".into()]));
    };
    let mut errs = Vec::new();
    for (k, v) in overrides {
        if v.is_object() || v.is_array() || map.get(k).is_some_and(|old| old.is_object() || old.is_array()) {
            errs.push(format!("{k}: only scalar keys can be overridden from the command line"));
        } else {
            map.insert(k.clone(), v.clone());
        }
    }
    let spec = build(command, &map, &mut errs);
    if errs.is_empty() {
        Ok(spec)
    } else {
        Err(CliError::Validation(errs))
    }
}

fn build(command: Command, map: &Map<String, Value>, errs: &mut Vec<String>) -> ExperimentSpec {
    let ok = accepted(command);
    let mut s = ExperimentSpec { command: Some(command), ..Default::default() };
    for (k, v) in map {
        if !ok.contains(&k.as_str()) {
            let known = Command::value_variants().iter().any(|c| accepted(*c).contains(&k.as_str()));
            errs.push(if known { format!("{k}: not used by the {command} command") } else { format!("{k}: unknown key") });
            continue;
        }
        match k.as_str() {
            "command" => {
                if let Some(c) = take::<Command>(k, v, errs) {
                    if c != command {
                        errs.push(format!("command: document is for `{c}` but `{command}` was requested"));
                    }
                }
            }
            "model" => s.model = take(k, v, errs),
            "kernel" => s.kernel = take(k, v, errs),
            "R_list" => s.r_list = take(k, v, errs),
            "R" => s.r = take(k, v, errs),
            "n_replicas" => s.n_replicas = take(k, v, errs),
            "seed" => s.seed = take(k, v, errs),
            "route" => s.route = take(k, v, errs),
            "v_max" => s.v_max = take(k, v, errs),
            "n_bins" => s.n_bins = take(k, v, errs),
            "k_max" => s.k_max = take(k, v, errs),
            "x_max" => s.x_max = take(k, v, errs),
            "s_exponent" => s.s_exponent = take(k, v, errs),
            "beta" => s.beta = take(k, v, errs),
            "theta_grid" => s.theta_grid = take(k, v, errs),
            "tile_count" => s.tile_count = take(k, v, errs),
            "C_log" => s.c_log = take(k, v, errs),
            "h" => s.h = take(k, v, errs),
            "iterations" => s.iterations = take(k, v, errs),
            "step" => s.step = take(k, v, errs),
            "kind" => s.kind = take(k, v, errs),
            "csv" => s.csv = take(k, v, errs),
            "summary" => s.summary = take(k, v, errs),
            _ => unreachable!("accepted() lists only handled keys"),
        }
    }
    for k in required(command) {
        if !map.contains_key(*k) {
            errs.push(format!("{k}: required by the {command} command"));
        }
    }
    if errs.is_empty() {
        fill_defaults(command, &mut s);
        check(command, &s, errs);
    }
    s
}

fn fill_defaults(command: Command, s: &mut ExperimentSpec) {
    let sampled = accepted(command).contains(&"seed");
    if sampled {
        s.seed.get_or_insert(0);
    }
    let replicas = match command {
        Command::Generate => 1,
        Command::Neighbors | Command::Crystal => 100,
        Command::Pinsker => 4000,
        _ => 200,
    };
    if sampled {
        s.n_replicas.get_or_insert(replicas);
    }
    match command {
        Command::Generate => {
            s.r.get_or_insert(64.0);
        }
        Command::Rho2 => {
            let r = *s.r.get_or_insert(64.0);
            s.v_max.get_or_insert((r / 8.0).min(8.0));
            s.n_bins.get_or_insert(64);
        }
        Command::Variance => {
            s.r_list.get_or_insert(vec![4.0, 8.0, 16.0, 32.0, 64.0, 128.0]);
        }
        Command::Energy => {
            s.r_list.get_or_insert(vec![32.0, 64.0, 128.0, 256.0]);
            s.route.get_or_insert(EnergyRoute::PairSumMc);
        }
        Command::Neighbors | Command::Crystal => {
            let l = *s.r.get_or_insert(256.0);
            let x = *s.x_max.get_or_insert((l / 4.0).min(64.0));
            s.k_max.get_or_insert(x.ceil() as usize + 10);
            s.n_bins.get_or_insert((16.0 * x).ceil() as usize);
            if command == Command::Crystal && s.s_exponent.is_none() {
                s.s_exponent = Some(s.kernel.map_or(0.0, |k| k.s()));
            }
        }
        Command::Freemin => {
            s.theta_grid.get_or_insert_with(|| geometric_grid(-4, 12, 2));
        }
        Command::Lp => {
            let v = *s.v_max.get_or_insert(16.0);
            s.h.get_or_insert(0.125);
            s.r.get_or_insert(v);
            s.iterations.get_or_insert(200);
            s.step.get_or_insert(0.5);
        }
        Command::Pinsker => {
            s.r_list.get_or_insert(vec![2.0, 4.0, 8.0]);
            s.tile_count.get_or_insert(4);
        }
        Command::Plot => {}
    }
}

fn positive(key: &str, v: Option<f64>, errs: &mut Vec<String>) {
    if let Some(x) = v {
        if !(x > 0.0 && x.is_finite()) {
            errs.push(format!("{key}: must be positive and finite, got {x}"));
        }
    }
}

fn check(command: Command, s: &ExperimentSpec, errs: &mut Vec<String>) {
    positive("R", s.r, errs);
    positive("v_max", s.v_max, errs);
    positive("x_max", s.x_max, errs);
    positive("beta", s.beta, errs);
    positive("h", s.h, errs);
    positive("step", s.step, errs);
    if let Some(rs) = &s.r_list {
        if rs.is_empty() || rs.iter().any(|r| !(*r > 0.0 && r.is_finite())) || rs.windows(2).any(|w| w[0] >= w[1]) {
            errs.push("R_list: must be a non-empty, strictly increasing list of positive values".into());
        }
    }
    if let Some(n) = s.n_replicas {
        let min = if command == Command::Generate { 1 } else { 2 };
        if n < min {
            errs.push(format!("n_replicas: must be at least {min}, got {n}"));
        }
    }
    if let (Some(m), Some(k)) = (&s.model, &s.kernel) {
        if m.dim() != k.dim() {
            errs.push(format!("kernel: dimension {} does not match the model dimension {}", k.dim(), m.dim()));
        }
    }
    if matches!(command, Command::Neighbors | Command::Crystal) {
        if let Some(m) = &s.model {
            if m.dim() != 1 {
                errs.push("model: k-th neighbour statistics need a one-dimensional model".into());
            }
        }
        if let (Some(x), Some(l)) = (s.x_max, s.r) {
            if x >= l {
                errs.push(format!("x_max: must be below R = {l}, got {x}"));
            }
        }
        if let Some(k) = s.k_max {
            if k == 0 {
                errs.push("k_max: must be at least 1".into());
            }
        }
        if let Some(se) = s.s_exponent {
            if !(0.0..1.0).contains(&se) {
                errs.push(format!("s_exponent: must lie in [0, 1), got {se}"));
            }
        }
    }
    if command == Command::Rho2 {
        if let (Some(v), Some(r)) = (s.v_max, s.r) {
            if v >= r {
                errs.push(format!("v_max: must be below R = {r}, got {v}"));
            }
        }
    }
    if command == Command::Variance {
        if s.c_log.is_some() != s.kernel.is_some() {
            errs.push("C_log: the logarithmic discrepancy curve needs both kernel and C_log".into());
        }
        if let Some(k) = &s.kernel {
            if !k.is_log() {
                errs.push("kernel: the logarithmic discrepancy curve needs a log kernel".into());
            }
        }
    }
    if command == Command::Freemin {
        if let Some(k) = &s.kernel {
            if k.dim() != 1 {
                errs.push("kernel: free-energy scans are one-dimensional".into());
            }
        }
        if let Some(g) = &s.theta_grid {
            if g.len() < 3 || !g.iter().all(|t| *t > 0.0) || g.windows(2).any(|w| w[0] >= w[1]) || !g.contains(&1.0) {
                errs.push("theta_grid: needs at least three increasing positive values including 1".into());
            }
        }
    }
    if command == Command::Lp {
        if let Some(k) = &s.kernel {
            if k.dim() != 1 {
                errs.push("kernel: the explorer is one-dimensional".into());
            }
        }
        if let (Some(v), Some(h), Some(r)) = (s.v_max, s.h, s.r) {
            if let Err(e) = Discretization::with_tent(v, h, r) {
                errs.push(format!("v_max/h/R: {e}"));
            }
        }
        if s.iterations == Some(0) {
            errs.push("iterations: must be at least 1".into());
        }
    }
    if command == Command::Pinsker {
        if let Some(t) = s.tile_count {
            let d = s.model.as_ref().map_or(1, |m| m.dim());
            let side = (t as f64).powf(1.0 / d as f64).round() as usize;
            if t == 0 || side.pow(d as u32) != t {
                errs.push(format!("tile_count: must be a positive perfect power of d = {d}, got {t}"));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors(command: Command, doc: &str) -> Vec<String> {
        match parse_spec(command, doc, &[]) {
            Err(CliError::Validation(e)) => e,
            other => panic!("expected validation errors, got {other:?}"),
        }
    }

    #[test]
    fn defaults_are_filled() {
        let s = parse_spec(Command::Lp, r#"{"kernel":{"family":"log1d"}}"#, &[]).unwrap();
        assert_eq!((s.v_max, s.h, s.r, s.iterations), (Some(16.0), Some(0.125), Some(16.0), Some(200)));
        assert_eq!(s.seed, None);
        let c = parse_spec(Command::Crystal, r#"{"model":{"type":"poisson","d":1}}"#, &[]).unwrap();
        assert_eq!((c.r, c.x_max, c.k_max, c.n_bins, c.s_exponent), (Some(256.0), Some(64.0), Some(74), Some(1024), Some(0.0)));
        assert_eq!((c.seed, c.n_replicas), (Some(0), Some(100)));
        let f = parse_spec(Command::Freemin, r#"{"kernel":{"family":"log1d"},"beta":2}"#, &[]).unwrap();
        let g = f.theta_grid.unwrap();
        assert_eq!((g[0], *g.last().unwrap()), (0.25, 64.0));
    }

    #[test]
    fn every_problem_is_reported() {
        let e = errors(Command::Freemin, r#"{"kernel":{"family":"riesz","d":1,"s":3},"n_bins":4,"colour":1}"#);
        let keys: Vec<&str> = e.iter().map(|m| m.split(':').next().unwrap()).collect();
        for k in ["kernel", "n_bins", "colour"] {
            assert!(keys.contains(&k), "{k} not in {e:?}");
        }
        let e = errors(Command::Freemin, r#"{"kernel":{"family":"log1d"},"beta":-1,"theta_grid":[1]}"#);
        assert_eq!(e.len(), 2, "{e:?}");
        assert!(errors(Command::Energy, "[1, 2]")[0].starts_with("<document>"));
        assert!(errors(Command::Energy, r#"{"model":{"type":"poisson","d":1}}"#).iter().any(|m| m.starts_with("kernel: required")));
    }

    #[test]
    fn theta_grid_must_contain_poisson() {
        let e = errors(Command::Freemin, r#"{"kernel":{"family":"log1d"},"beta":1,"theta_grid":[2,4,8]}"#);
        assert!(e[0].starts_with("theta_grid"));
    }

    #[test]
    fn overrides_are_scalar_only() {
        let doc = r#"{"model":{"type":"poisson","d":1},"kernel":{"family":"log1d"}}"#;
        let e = parse_spec(Command::Energy, doc, &[("model".into(), Value::from(3))]).unwrap_err();
        assert!(matches!(e, CliError::Validation(ref v) if v[0].starts_with("model: only scalar")));
        let s = parse_spec(Command::Energy, doc, &[("route".into(), Value::from("rho2_quadrature"))]).unwrap();
        assert_eq!(s.route, Some(EnergyRoute::Rho2Quadrature));
    }

    #[test]
    fn spec_echo_uses_file_keys() {
        let s = parse_spec(Command::Pinsker, r#"{"model":{"type":"renewal","gap":{"law":"gamma","shape":2}}}"#, &[]).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains(r#""R_list""#));
        assert!(!text.contains("null"), "{text}");
    }
}
