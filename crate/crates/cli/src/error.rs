use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, sizes, families or config: exit code 2.
    #[error("{0}")]
    Usage(String),
    /// A verification check found a violation: exit code 1.
    #[error("check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Check(_) | CliError::Other(_) => ExitCode::from(1),
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
