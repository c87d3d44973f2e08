use std::path::Path;

use arena_core::arena::{ArenaError, LogError};
use thiserror::Error;

/// Exit status: 1 for anything the operator got wrong, 2 for I/O trouble.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<ArenaError> for CliError {
    fn from(e: ArenaError) -> Self {
        match e {
            ArenaError::Storage(msg) => CliError::Io(msg),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<LogError> for CliError {
    fn from(e: LogError) -> Self {
        match e {
            LogError::Io(err) => CliError::Io(err.to_string()),
            corrupt => CliError::Validation(corrupt.to_string()),
        }
    }
}

impl From<arena_core::sim::SimError> for CliError {
    fn from(e: arena_core::sim::SimError) -> Self {
        CliError::Validation(e.to_string())
    }
}
