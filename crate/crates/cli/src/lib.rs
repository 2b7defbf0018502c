//! Experiment driver behind the `viscoflow` binary.
//!
//! Each command reads an [`config::ExperimentConfig`], runs one of the core
//! solvers and writes CSV tables plus a `summary.json` into the output
//! directory.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n{0}")]
    Config(String),

    #[error(transparent)]
    Solver(#[from] viscoflow_core::Error),

    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(viscoflow_core::Error::Config(_) | viscoflow_core::Error::Usage(_)) => 1,
            CliError::Solver(_) => 2,
            CliError::Assertion(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}
