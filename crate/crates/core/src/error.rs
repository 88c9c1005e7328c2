use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("oracle `{0}` has no exact reference quantities")]
    NoReference(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A run produced NaN/Inf at step `t`.
    #[error("numerical abort at t={t}: {what}")]
    NumericalAbort { t: usize, what: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether this error comes from a diverging computation rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalAbort { .. } | Error::NonFinite(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
