use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("run failed: {0}")]
    Runtime(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

impl From<ergodic_core::Error> for CliError {
    fn from(e: ergodic_core::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
