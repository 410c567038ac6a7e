//! Differentially private estimation of high-dimensional sparse
//! covariance matrices.
//!
//! Two Gaussian-mechanism pipelines produce positive-semidefinite
//! estimates of a sparse covariance matrix: a central-model one that
//! perturbs the empirical covariance once, and a local-model one where
//! each record is privatized before aggregation. Both hard-threshold the
//! perturbed matrix and project onto the PSD cone by eigenvalue clipping.
//! The crate also ships the synthetic ground-truth generator and the
//! operator-norm metrics used to benchmark them.
//!
//! Estimators are exposed as strategies behind
//! [`algorithm::CovarianceEstimator`], registered by name
//! (`central`, `local`, `naive`) in an [`algorithm::EstimatorRegistry`]
//! and selected at runtime.

pub mod algorithm;
pub mod datagen;
pub mod error;
pub mod estimator;
pub mod ldp;
pub mod matrix;
pub mod mechanism;
pub mod metrics;

pub use algorithm::{CovarianceEstimator, Estimate, EstimatorRegistry};
pub use error::{Error, Result};
pub use estimator::{DiagonalPolicy, EstimatorConfig, Mode};
pub use matrix::{SampleSet, SymMatrix};
pub use mechanism::{NoiseScale, PrivacyBudget};
pub use metrics::Norm;
