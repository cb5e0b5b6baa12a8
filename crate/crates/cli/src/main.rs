//! `fracsde` — experiment orchestration for the Caputo fractional SDE
//! laboratory.
//!
//! Subcommands:
//! - `run <config.json> --out <dir> [--threads N] [--seed S]`: dispatch a
//!   JSON-described experiment, writing CSV artifacts, a JSON summary and
//!   a reproducibility manifest (written last, as the commit marker).
//! - `selfcheck`: print the special-function reference table.
//! - `gronwall`: print the three singular-Gronwall bounds on a grid as CSV.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime error,
//! 3 inconclusive (weak-derivative extrapolation failed to contract).

mod config;
mod csvio;
mod runner;
mod selfcheck;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, GronwallConfig, OmegaConfig};
use fracsde_core::gronwall::GronwallProblem;
use fracsde_core::paths::make_grid;
use runner::{Outcome, RunError};

#[derive(Parser)]
#[command(
    name = "fracsde",
    version,
    about = "Caputo fractional SDE simulation laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file
    Run {
        /// Path to the experiment config (JSON)
        config: PathBuf,
        /// Output directory for artifacts and the manifest
        #[arg(long)]
        out: PathBuf,
        /// Size of the worker thread pool (default: one per core)
        #[arg(long)]
        threads: Option<usize>,
        /// Override the seed from the config
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Verify the special-function layer against its reference table
    Selfcheck,
    /// Print the three singular-Gronwall bounds on a grid as CSV
    Gronwall {
        /// Kernel coefficient a > 0
        #[arg(long)]
        a: f64,
        /// Singularity exponent η ∈ (0, 1]; 1 is the classical limit
        #[arg(long)]
        eta: f64,
        /// Time horizon T > 0
        #[arg(long)]
        horizon: f64,
        /// Number of grid steps
        #[arg(long, default_value_t = 64)]
        steps: usize,
        /// Forcing preset: constant:<c>, linear:<rate> or sqrt:<scale>
        #[arg(long, default_value = "constant:1")]
        omega: String,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            threads,
            seed,
        } => match run_experiment(&config, &out, threads, seed) {
            Ok(Outcome::Success) => ExitCode::SUCCESS,
            Ok(Outcome::Inconclusive) => {
                eprintln!("inconclusive: weak-derivative extrapolation did not contract");
                ExitCode::from(3)
            }
            Err(RunError::Validation(msg)) => {
                eprintln!("validation error: {msg}");
                ExitCode::from(1)
            }
            Err(RunError::Runtime(msg)) => {
                eprintln!("runtime error: {msg}");
                ExitCode::from(2)
            }
        },
        Command::Selfcheck => {
            if selfcheck::print() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Command::Gronwall {
            a,
            eta,
            horizon,
            steps,
            omega,
        } => match gronwall_stdout(a, eta, horizon, steps, &omega) {
            Ok(()) => ExitCode::SUCCESS,
            Err(RunError::Validation(msg)) => {
                eprintln!("validation error: {msg}");
                ExitCode::from(1)
            }
            Err(RunError::Runtime(msg)) => {
                eprintln!("runtime error: {msg}");
                ExitCode::from(2)
            }
        },
    }
}

fn run_experiment(
    config_path: &Path,
    out: &Path,
    threads: Option<usize>,
    seed: Option<u64>,
) -> Result<Outcome, RunError> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Validation(format!("--threads: {e}")))?;
    }
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| RunError::Validation(format!("{}: {e}", config_path.display())))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| RunError::Validation(format!("{}: {e}", config_path.display())))?;
    if let Some(s) = seed {
        match config.mc.as_mut() {
            Some(mc) => mc.seed = s,
            None => {
                return Err(RunError::Validation(
                    "--seed given but the config has no mc section".into(),
                ))
            }
        }
    }
    runner::run(&config, out)
}

fn parse_omega(spec: &str) -> Result<OmegaConfig, RunError> {
    let (name, value) = spec.split_once(':').unwrap_or((spec, "1"));
    let v: f64 = value
        .parse()
        .map_err(|e| RunError::Validation(format!("--omega: bad parameter {value:?}: {e}")))?;
    match name {
        "constant" => Ok(OmegaConfig::Constant { value: v }),
        "linear" => Ok(OmegaConfig::Linear { rate: v }),
        "sqrt" => Ok(OmegaConfig::Sqrt { scale: v }),
        other => Err(RunError::Validation(format!(
            "--omega: unknown preset {other:?} (expected constant, linear or sqrt)"
        ))),
    }
}

fn gronwall_stdout(
    a: f64,
    eta: f64,
    horizon: f64,
    steps: usize,
    omega: &str,
) -> Result<(), RunError> {
    let omega_cfg = parse_omega(omega)?;
    let gw = GronwallConfig {
        a,
        eta,
        omega: omega_cfg,
    };
    if !(a > 0.0 && a.is_finite()) {
        return Err(RunError::Validation(format!(
            "--a: must be positive, got {a}"
        )));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(RunError::Validation(format!(
            "--eta: must lie in (0, 1], got {eta}"
        )));
    }
    let grid = make_grid(horizon, steps)?;
    let problem = GronwallProblem::new(gw.a, gw.eta, horizon, gw.omega.build(), true)?;
    let table = runner::gronwall_table(&problem, &grid)?;
    print!("{}", csvio::render_csv(&table));
    Ok(())
}
