//! IO, file formats, and orchestration around `dyngraph-core`.

pub mod config;
pub mod commands;
pub mod dataset;
pub mod model_io;
pub mod report;
pub mod wav;

use std::process::ExitCode;

/// Command failures carrying the process exit code: 2 for usage/config
/// problems, 3 for runtime or numeric failures.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0:#}")]
    Usage(#[source] anyhow::Error),
    #[error("{0:#}")]
    Runtime(#[source] anyhow::Error),
}

impl CliError {
    pub fn usage(err: impl Into<anyhow::Error>) -> Self {
        CliError::Usage(err.into())
    }

    pub fn runtime(err: impl Into<anyhow::Error>) -> Self {
        CliError::Runtime(err.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(3),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
