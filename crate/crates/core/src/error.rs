//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by simulator operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an operation argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Calibration could not be fitted or is degenerate.
    #[error("calibration failure: {0}")]
    Calibration(String),

    /// A value fell outside the encodable range and clipping was not enabled.
    #[error("value {value} outside encodable range [{min}, {max}]")]
    Range { value: f64, min: f64, max: f64 },

    /// A scenario or config is internally inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// A file could not be parsed; `location` names the offending field/offset.
    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: String,
        location: String,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn calibration(msg: impl Into<String>) -> Self {
        Error::Calibration(msg.into())
    }
}
