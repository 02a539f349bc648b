//! Command-line front end: configuration loading, run orchestration and
//! file output.
//!
//! Exit codes: 0 success, 2 configuration error, 3 math-domain error,
//! 4 I/O error.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{exit, CliError};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SEQIR_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "seqir", version, about = "Regime-switching stochastic SEQIR epidemic toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Only report errors.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extinction and persistence thresholds as a TOML report.
    Thresholds(CommonArgs),
    /// One trajectory as CSV.
    Simulate(CommonArgs),
    /// `ensemble.n` trajectories plus a summary, into a directory.
    Ensemble(CommonArgs),
    /// Stationary law, transition matrix and an occupancy check.
    Chain(CommonArgs),
    /// Stochastic ensemble mean against the deterministic model.
    CompareDet(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output file (a directory for `ensemble`); defaults to a fixed name
    /// under `$SEQIR_OUT_DIR` or the working directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the seed (the base seed for `ensemble` and `compare-det`).
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Thresholds(_) => "thresholds",
            Self::Simulate(_) => "simulate",
            Self::Ensemble(_) => "ensemble",
            Self::Chain(_) => "chain",
            Self::CompareDet(_) => "compare-det",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Self::Thresholds(a)
            | Self::Simulate(a)
            | Self::Ensemble(a)
            | Self::Chain(a)
            | Self::CompareDet(a) => a,
        }
    }
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Runs one subcommand and returns the path written.
pub fn run(command: &Command) -> Result<PathBuf, CliError> {
    let args = command.args();
    let config = RunConfig::load(&args.config)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| commands::default_output(&default_out_dir(), command.name()));
    match command {
        Command::Thresholds(_) => {
            commands::cmd_thresholds(&config, &out)?;
        }
        Command::Simulate(_) => {
            commands::cmd_simulate(&config, &out, args.seed)?;
        }
        Command::Ensemble(_) => {
            commands::cmd_ensemble(&config, &out, args.seed)?;
        }
        Command::Chain(_) => {
            commands::cmd_chain(&config, &out, args.seed)?;
        }
        Command::CompareDet(_) => {
            commands::cmd_compare_det(&config, &out, args.seed)?;
        }
    }
    Ok(out)
}
