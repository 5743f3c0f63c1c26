//! Batch driver for the `switchreg` solvers: reads a TOML run
//! configuration, runs one pipeline per subcommand and writes CSV fields and
//! JSON reports with bit-stable formatting.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod json;

pub use config::{load_config, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] switchreg::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    /// 2 for configuration problems, 1 for failed checks and solver errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "switchreg", version, about = "Solvers and diagnostics for two-mode optimal switching systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory (overrides `output.dir`)
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Nodes per axis (overrides `problem.nx` and `problem.ny`)
    #[arg(long, global = true, value_name = "INT")]
    pub n: Option<usize>,

    /// Suppress the summary on stdout
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the configured problem; writes the solution CSV and residual JSON
    Solve,
    /// Residual and set-partition reports for the configured problem
    Residuals,
    /// Blow-up diagnostics at the configured probe points
    Regularity,
    /// Closed-form counterexample checks and the solver comparison
    Counterexample,
    /// Constraint violation of the penalized path against eps
    SweepEps,
    /// Non-uniqueness family against the minimal solution
    Nonminimal,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Residuals => "residuals",
            Command::Regularity => "regularity",
            Command::Counterexample => "counterexample",
            Command::SweepEps => "sweep-eps",
            Command::Nonminimal => "nonminimal",
        }
    }
}

/// Parses arguments and runs one command. Returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match commands::execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
