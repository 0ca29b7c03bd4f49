//! Config-driven runner for the weight diagnostics, operator sweeps, atom
//! campaigns and verification checks of `riesz-core`.

pub mod commands;
pub mod config;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const ERROR: i32 = 1;
    pub const CHECK_FAILED: i32 = 2;
    pub const HYPOTHESIS_FAILED: i32 = 3;
    pub const CONFIG: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("hypothesis failed: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Core(#[from] riesz_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Hypothesis(_) => exit::HYPOTHESIS_FAILED,
            CliError::Core(riesz_core::Error::HypothesisFailed(_)) => exit::HYPOTHESIS_FAILED,
            CliError::Core(_) | CliError::Io(_) => exit::ERROR,
        }
    }
}
