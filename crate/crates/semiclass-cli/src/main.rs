//! Command-line front end for the phase-space particle solver.

// As in the library: `!(x > 0.0)` in validation guards also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use clap::{Args, Parser, Subcommand};
use run::CliError;
use semiclass::prelude::Method;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Time-evolved quantum expectation values in the semiclassical regime:
/// particle estimators on the corrected classical flow, plus a grid-based
/// reference solver for validation in low dimension.
#[derive(Parser)]
#[command(name = "semiclass", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run particle estimators for every configured (ε, method) pair.
    Simulate(RunArgs),
    /// Run the grid reference solver (d ≤ 2) and write a final-state checkpoint.
    Reference(RunArgs),
    /// Fit log-log convergence slopes from error tables written by `simulate`.
    Converge(ConvergeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file, or the name of a built-in preset: torsional-d[-desk],
    /// torsional-e[-desk], henon-heiles[-desk], harmonic-sanity.
    #[arg(long)]
    config: String,

    /// Override the method list (comma-separated: husimi-corrected,
    /// husimi-naive, wigner).
    #[arg(long)]
    method: Option<String>,

    /// Override the ε list (comma-separated).
    #[arg(long)]
    epsilon: Option<String>,

    /// Override the leading-order ensemble size for every ε.
    #[arg(long)]
    n1: Option<usize>,

    /// Override the correction ensemble size for every ε.
    #[arg(long)]
    n2: Option<usize>,

    /// Override the leading-order step size for every ε.
    #[arg(long)]
    h1: Option<f64>,

    /// Override the correction step size for every ε.
    #[arg(long)]
    h2: Option<f64>,

    /// Override the final time.
    #[arg(long)]
    t_final: Option<f64>,

    /// Override the sampler seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Cap the worker-thread count (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ConvergeArgs {
    /// Glob over error tables written by `simulate`, e.g. "out/run-eps*-*.csv".
    #[arg(long)]
    inputs: String,

    /// Path of the convergence summary to write.
    #[arg(long)]
    output: PathBuf,
}

fn parse_list<T>(raw: &str, what: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, CliError> {
    let items: Result<Vec<T>, String> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(&parse)
        .collect();
    match items {
        Ok(v) if v.is_empty() => Err(CliError::Config(format!("--{what} is empty"))),
        Ok(v) => Ok(v),
        Err(e) => Err(CliError::Config(format!("--{what}: {e}"))),
    }
}

fn load_config(args: &RunArgs) -> Result<config::ExperimentConfig, CliError> {
    let path = Path::new(&args.config);
    let mut cfg = if path.exists() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        config::parse(&text)?
    } else if let Some(preset) = config::preset(&args.config) {
        preset
    } else {
        return Err(CliError::Config(format!(
            "`{}` is neither a readable file nor a preset (presets: {})",
            args.config,
            config::PRESET_NAMES.join(", ")
        )));
    };

    if let Some(raw) = &args.method {
        cfg.methods = parse_list(raw, "method", |s| {
            Method::parse(s).map_err(|e| e.to_string())
        })?;
    }
    if let Some(raw) = &args.epsilon {
        cfg.epsilons = parse_list(raw, "epsilon", |s| {
            s.parse::<f64>().map_err(|e| format!("`{s}`: {e}"))
        })?;
    }
    for (_, schedule) in &mut cfg.schedules {
        if let Some(n1) = args.n1 {
            schedule.n1 = n1;
        }
        if let Some(n2) = args.n2 {
            schedule.n2 = n2;
        }
        if let Some(h1) = args.h1 {
            schedule.h1 = h1;
        }
        if let Some(h2) = args.h2 {
            schedule.h2 = h2;
        }
    }
    if let Some(t_final) = args.t_final {
        cfg.t_final = t_final;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(output) = &args.output {
        cfg.output = output.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(k) = threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("cannot size the thread pool: {e}")))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => {
            init_threads(args.threads)?;
            let cfg = load_config(&args)?;
            run::simulate(&cfg)
        }
        Command::Reference(args) => {
            init_threads(args.threads)?;
            let cfg = load_config(&args)?;
            run::reference(&cfg)
        }
        Command::Converge(args) => run::converge(&args.inputs, &args.output),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
