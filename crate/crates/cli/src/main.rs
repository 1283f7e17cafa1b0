//! `pcs` — command-line front end for probabilistic constellation shaping
//! experiments: train shaped distributions, sweep operating points,
//! validate finished runs, and compute reference baselines.
//!
//! Exit codes: 0 success, 1 I/O or environment trouble, 2 bad input
//! (config file, flags, malformed result files), 3 numerical failure
//! (training abort, non-convergence, failed validation checks).

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Bad user input: config files, flags, result files to validate.
    Config(String),
    /// A computation failed or a check did not pass.
    Numeric(String),
    /// Filesystem or environment trouble.
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Numeric(msg) | CliError::Io(msg) => f.write_str(msg),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "pcs",
    version,
    about = "Probabilistic constellation shaping experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a shaped distribution and write result.json, trace.csv, and
    /// distribution.csv into the configured output directory.
    Optimize {
        /// Experiment description (TOML).
        config: PathBuf,
        /// Override the config's random seed; the value used is recorded
        /// in result.json.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train at every configured operating point (in parallel) and write
    /// per-point JSON plus an aggregate sweep.csv.
    Sweep {
        /// Experiment description (TOML) with a [sweep] section.
        config: PathBuf,
        /// Override the config's random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: one per CPU). Results do not depend
        /// on this.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Re-examine a finished result.json with independent machinery:
    /// simplex check, rate recomputation, and a gradient spot check.
    Validate {
        /// Path to a result.json written by `optimize`.
        result: PathBuf,
        /// Allowed |recomputed - trace| in bits/symbol (Monte-Carlo
        /// recomputations widen this by three standard errors).
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
        /// Gauss-Hermite nodes per dimension for the recomputation.
        #[arg(long, default_value_t = 64)]
        nodes: usize,
        /// Sample count for Monte-Carlo recomputations (square-law
        /// channel).
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
    },
    /// Evaluate a reference distribution (uniform, exponential-family
    /// scan, or capacity-achieving) without training.
    Baseline {
        /// Experiment description (TOML) with a [baseline] section.
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Optimize { config, seed } => commands::optimize::run(&config, seed),
        Command::Sweep { config, seed, jobs } => commands::sweep::run(&config, seed, jobs),
        Command::Validate {
            result,
            tolerance,
            nodes,
            mc_samples,
        } => commands::validate::run(
            &result,
            &commands::validate::ValidateArgs {
                tolerance,
                quadrature_nodes: nodes,
                mc_samples,
            },
        ),
        Command::Baseline { config } => commands::baseline::run(&config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code())
        }
    }
}
