//! Command implementations behind the `kbc` binary.
//!
//! Each command takes a [`RunConfig`], writes its artifacts under the
//! output directory, prints a human-readable summary and returns an
//! [`ExitStatus`].

mod commands;
mod config;

use thiserror::Error;

pub use commands::{cmd_calibrate, cmd_complete, cmd_estimate, cmd_evaluate, cmd_sweep};
pub use config::{KbConfig, ProviderConfig, RunConfig, SearchConfig};

/// Process exit statuses. The numeric codes are stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    /// I/O, endpoint or provider failure that stopped the command.
    Failure,
    ConfigError,
    /// A budget limit stopped the run; outputs cover what was admitted.
    BudgetStop,
    /// Finished, but some subjects or relations failed.
    PartialFailure,
    Interrupted,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Failure => 1,
            ExitStatus::ConfigError => 2,
            ExitStatus::BudgetStop => 3,
            ExitStatus::PartialFailure => 4,
            ExitStatus::Interrupted => 130,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            CliError::Config(_) => ExitStatus::ConfigError,
            CliError::Runtime(_) => ExitStatus::Failure,
        }
    }
}

impl From<crate::pipeline::PipelineError> for CliError {
    fn from(e: crate::pipeline::PipelineError) -> Self {
        use crate::pipeline::PipelineError;
        match e {
            PipelineError::Config(_) | PipelineError::Prompt(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}
