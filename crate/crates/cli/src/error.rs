use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Planner(String),
}

impl CliError {
    /// Process exit status, following sysexits.h where one applies.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Planner(_) => 2,
            CliError::Usage(_) => 64,
            CliError::Data(_) => 65,
            CliError::Io { .. } => 74,
        }
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn data(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{context}: {err}"))
    }
}
