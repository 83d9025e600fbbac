use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("SGD diverged at step {step} (lr = {lr:e}): non-finite {what}")]
    Divergence {
        step: usize,
        lr: f64,
        what: &'static str,
    },

    #[error("training produced a non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("hypothesis {index}: {source}")]
    Hypothesis {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("kernel matrix is not positive definite at jitter {jitter:e}; retry with a larger jitter (e.g. {suggested:e})")]
    Singular { jitter: f64, suggested: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Whether the failure came from the numerics rather than from inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Divergence { .. }
            | Error::NonFiniteLoss { .. }
            | Error::Singular { .. }
            | Error::Numerical(_)
            | Error::Degenerate(_) => true,
            Error::Hypothesis { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
