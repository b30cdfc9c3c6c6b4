use thiserror::Error;

/// Errors raised by the estimators and tests.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The input violates a precondition (shape, finiteness, parameter domain).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A segment is too short for the requested estimator.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn insufficient(msg: impl Into<String>) -> Error {
    Error::InsufficientData(msg.into())
}
