use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rieszlab_cli::{parse_spec, run, CliError, Command};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "rieszlab", version, about = "Intrinsic-energy experiments for stationary point processes")]
struct Args {
    command: Command,
    /// Experiment file (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a scalar key, e.g. --set n_replicas=50.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn overrides(args: &Args) -> Result<Vec<(String, Value)>, CliError> {
    let mut out = Vec::new();
    let mut errs = Vec::new();
    for kv in &args.set {
        match kv.split_once('=') {
            Some((k, v)) => {
                let val = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_owned()));
                out.push((k.trim().to_owned(), val));
            }
            None => errs.push(format!("--set {kv}: expected KEY=VALUE")),
        }
    }
    if let Some(s) = args.seed {
        out.push(("seed".into(), s.into()));
    }
    if errs.is_empty() {
        Ok(out)
    } else {
        Err(CliError::Validation(errs))
    }
}

fn main_inner(args: &Args) -> Result<(), CliError> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Validation(vec!["--threads: must be positive".into()]));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    }
    let doc = std::fs::read_to_string(&args.config).map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let spec = parse_spec(args.command, &doc, &overrides(args)?)?;
    let manifest = run(&spec, &args.out)?;
    for o in &manifest.outputs {
        println!("{}  {}", o.sha256, args.out.join(&o.file).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
