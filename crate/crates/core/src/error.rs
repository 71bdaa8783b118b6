use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimation engine and its supporting numerics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("numerical failure at row {row}, component {component}: {message}")]
    Numeric {
        row: usize,
        component: usize,
        message: String,
    },

    #[error("non-finite log-likelihood at row {row}")]
    NonFiniteLikelihood { row: usize },

    #[error("component {component} degenerated at iteration {iteration} (mass {mass:.3})")]
    DegenerateComponent {
        component: usize,
        iteration: usize,
        mass: f64,
    },

    #[error("singular update for component {component}: {message}")]
    SingularUpdate { component: usize, message: String },

    #[error("{message} (iteration {iteration})")]
    FitFailed { iteration: usize, message: String },

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    /// True for errors caused by numerical breakdown during fitting rather
    /// than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::NotPositiveDefinite(_)
                | Error::Numeric { .. }
                | Error::NonFiniteLikelihood { .. }
                | Error::DegenerateComponent { .. }
                | Error::SingularUpdate { .. }
                | Error::FitFailed { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
