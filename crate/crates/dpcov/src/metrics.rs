//! Operator norms and relative-error reporting.
//!
//! Three computable operator norms: l1 (maximum absolute column sum),
//! l-infinity (maximum absolute row sum), and l2 (largest singular value;
//! for symmetric input the largest absolute eigenvalue). Any intermediate
//! lw operator norm is bounded by the maximum of these three, so they are
//! the reporting surface.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{symmetric_eigen, SymMatrix};

const SYMMETRY_DETECT_TOL: f64 = 1e-10;

/// Which operator norm to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    LInf,
}

impl Norm {
    pub const ALL: [Norm; 3] = [Norm::L1, Norm::L2, Norm::LInf];
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::LInf => "linf",
        };
        f.write_str(s)
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            "linf" | "loo" => Ok(Norm::LInf),
            other => Err(Error::Parse(format!("unknown norm {other:?}"))),
        }
    }
}

/// Maximum absolute column sum.
pub fn operator_norm_1(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute row sum.
pub fn operator_norm_inf(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest singular value. Symmetric input (detected to 1e-10) goes
/// through the symmetric eigendecomposition; anything else through an SVD.
pub fn operator_norm_2(m: &DMatrix<f64>) -> Result<f64> {
    let symmetric = m.nrows() == m.ncols()
        && (0..m.ncols())
            .all(|j| (0..j).all(|i| (m[(i, j)] - m[(j, i)]).abs() <= SYMMETRY_DETECT_TOL));
    if symmetric {
        let eig = symmetric_eigen(m)?;
        Ok(eig.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max))
    } else {
        let max_niter = 64 * m.nrows().max(m.ncols()).max(8);
        let svd = nalgebra::SVD::try_new(m.clone(), false, false, f64::EPSILON, max_niter)
            .ok_or(Error::EigenFailure)?;
        Ok(svd.singular_values.iter().copied().fold(0.0, f64::max))
    }
}

pub fn operator_norm(m: &DMatrix<f64>, norm: Norm) -> Result<f64> {
    match norm {
        Norm::L1 => Ok(operator_norm_1(m)),
        Norm::L2 => operator_norm_2(m),
        Norm::LInf => Ok(operator_norm_inf(m)),
    }
}

/// Frobenius norm; used by projection diagnostics, not a headline metric.
pub fn frobenius_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `||est - truth|| / ||truth||` under the chosen operator norm.
pub fn relative_error(est: &SymMatrix, truth: &SymMatrix, norm: Norm) -> Result<f64> {
    if est.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            expected: truth.dim(),
            got: est.dim(),
        });
    }
    let denom = operator_norm(truth.matrix(), norm)?;
    if denom == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    let diff = est.matrix() - truth.matrix();
    Ok(operator_norm(&diff, norm)? / denom)
}
