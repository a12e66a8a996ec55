//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("matrix error: {0}")]
    Matrix(String),
    #[error("convergence failure in {context}: residual {residual:.3e} after {iterations} iterations")]
    Convergence {
        context: String,
        residual: f64,
        iterations: usize,
    },
    #[error("step failure at t={time}: {source}")]
    StepFailure {
        time: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
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

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for the CLI: configuration errors, solver
    /// non-convergence and I/O failures get distinct codes.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Unsupported(_) => 2,
            Error::Convergence { .. } | Error::StepFailure { .. } => 3,
            Error::Io { .. } => 4,
            _ => 1,
        }
    }
}
