use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("plate center {0:?} lies outside the box")]
    OutsideBox([f64; 3]),

    #[error("no plate stored under handle {0}")]
    InvalidHandle(usize),

    #[error("observable undefined: {0}")]
    Undefined(String),

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("incompatible geometry: {0}")]
    Incompatible(String),

    #[error("impossible configuration: {0}")]
    ImpossibleConfiguration(String),

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("expansion not certified: {0}")]
    NotConvergent(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
