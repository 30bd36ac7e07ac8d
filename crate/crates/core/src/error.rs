use thiserror::Error;

/// Errors raised by the solvers, oracles and data loaders.
#[derive(Debug, Error)]
pub enum FwError {
    #[error("non-finite {what} at iteration {k}")]
    NonFinite { what: &'static str, k: usize },

    #[error("linear minimization oracle failed: {0}")]
    Lmo(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, FwError>;

pub(crate) fn ensure_finite(value: f64, what: &'static str, k: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(FwError::NonFinite { what, k })
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(FwError::Dimension { expected, got })
    }
}
