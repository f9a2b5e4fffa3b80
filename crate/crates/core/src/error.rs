use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("numerical validity failure: {0}")]
    Validity(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("below threshold: {0}")]
    BelowThreshold(String),
    #[error("grid did not converge: {0}")]
    NotConverged(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
