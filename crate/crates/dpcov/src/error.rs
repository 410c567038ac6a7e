//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric at entry ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("symmetric eigendecomposition did not converge")]
    EigenFailure,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("relative error undefined: reference matrix has zero norm")]
    ZeroNormReference,

    #[error("estimator mode mismatch: expected {expected}, got {got}")]
    ModeMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("unknown estimator: {0:?}")]
    UnknownEstimator(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
