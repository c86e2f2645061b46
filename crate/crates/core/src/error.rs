use std::path::PathBuf;

use thiserror::Error;

/// Errors produced while building systems, transforming Hamiltonians and
/// solving for mean-field or exact ground states.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{what} is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { what: String, asymmetry: f64 },

    #[error("squeeze amplitude |r| = {r} exceeds the cap {cap}")]
    SqueezeCap { r: f64, cap: f64 },

    #[error("{quantity} is not converged in the boson truncation (change {change:.3e} > {tolerance:.1e})")]
    Truncation {
        quantity: String,
        change: f64,
        tolerance: f64,
    },

    #[error("Hilbert-space dimension {dim} exceeds the limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver failed: {0}")]
    EigenSolver(String),

    #[error("ansatz {ansatz} does not carry parameter `{parameter}`")]
    WrongAnsatz {
        ansatz: &'static str,
        parameter: &'static str,
    },

    #[error("state is not normalized (norm^2 = {0:.12})")]
    NotNormalized(f64),

    #[error("SCF result is not converged")]
    Unconverged,
}

pub type Result<T> = std::result::Result<T, Error>;
