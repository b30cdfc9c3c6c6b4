use thiserror::Error;

/// Failure of a CLI run, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or configuration; exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or invalid data, or a failed test precondition; exit code 2.
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<relchange_core::Error> for CliError {
    fn from(e: relchange_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
