//! Dense symmetric matrices and sample sets.
//!
//! [`SymMatrix`] is the carrier for every covariance-like object in the
//! crate: the true covariance, the empirical covariance, the perturbed,
//! thresholded and projected estimates, and noise matrices. Symmetry is
//! exact (bitwise), not approximate; constructors enforce it.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Tolerance on the per-row norm bound of a [`SampleSet`].
pub const NORM_TOL: f64 = 1e-9;

/// Floor used when checking positive semidefiniteness numerically.
pub const PSD_TOL: f64 = 1e-10;

// Total QL iteration budget; typical convergence needs ~3 per eigenvalue.
fn max_eigen_iter(p: usize) -> usize {
    64 * p.max(8)
}

/// A real symmetric p x p matrix with exact entrywise symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Validates squareness and exact symmetry.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::EmptyInput("matrix must have dimension >= 1"));
        }
        for j in 0..m.ncols() {
            for i in 0..j {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::NotSymmetric { i, j });
                }
            }
        }
        Ok(Self { inner: m })
    }

    /// Symmetrizes a square matrix as (A + A^T)/2, absorbing round-off.
    pub fn from_matrix_symmetrized(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::EmptyInput("matrix must have dimension >= 1"));
        }
        let p = m.nrows();
        let mut out = m;
        for j in 0..p {
            for i in 0..j {
                let v = (out[(i, j)] + out[(j, i)]) / 2.0;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(Self { inner: out })
    }

    /// Constructor for matrices that are symmetric by construction.
    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert!(m.nrows() == m.ncols());
        debug_assert!((0..m.ncols()).all(|j| (0..j).all(|i| m[(i, j)] == m[(j, i)])));
        Self { inner: m }
    }

    /// Builds a symmetric matrix from a function of the upper triangle
    /// (i <= j), mirroring each value to the lower triangle.
    pub fn from_upper_fn(p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self::new_unchecked(m)
    }

    pub fn zeros(p: usize) -> Self {
        Self::new_unchecked(DMatrix::zeros(p, p))
    }

    pub fn identity(p: usize) -> Self {
        Self::new_unchecked(DMatrix::identity(p, p))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let p = diag.len();
        let mut m = DMatrix::zeros(p, p);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        Self::new_unchecked(m)
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    /// Smallest eigenvalue, via a full symmetric eigendecomposition.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let eig = symmetric_eigen(&self.inner)?;
        Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// Serializes as plain-text CSV: p rows of p comma-separated values,
    /// row-major, full matrix. Values use the shortest representation
    /// that round-trips exactly; the decimal separator is always '.'.
    pub fn to_csv_string(&self) -> String {
        let p = self.dim();
        let mut out = String::new();
        for i in 0..p {
            for j in 0..p {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", self.inner[(i, j)]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|field| {
                    field.trim().parse::<f64>().map_err(|e| {
                        Error::Parse(format!("line {}: {:?}: {}", lineno + 1, field, e))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput("matrix CSV has no rows"));
        }
        let p = rows.len();
        for row in &rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
        }
        let m = DMatrix::from_fn(p, p, |i, j| rows[i][j]);
        Self::from_matrix(m)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_csv_str(&s)
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.inner[idx]
    }
}

/// Full symmetric eigendecomposition; non-convergence surfaces as an error.
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, Dyn>> {
    SymmetricEigen::try_new(m.clone(), f64::EPSILON, max_eigen_iter(m.nrows()))
        .ok_or(Error::EigenFailure)
}

/// An n x p set of observations; rows are samples.
///
/// The per-row norm bound `||x_i||_2 <= 1` assumed by the privacy
/// calibration is recorded, not enforced: `norm_bound_held` tells whether
/// every row satisfied it (up to [`NORM_TOL`]). Use
/// [`SampleSet::from_matrix_enforced`] to reject violating data instead.
#[derive(Debug, Clone)]
pub struct SampleSet {
    rows: DMatrix<f64>,
    norm_bound_held: bool,
    norm_violation_fraction: f64,
}

impl SampleSet {
    pub fn from_matrix(rows: DMatrix<f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::EmptyInput("sample set must have n >= 1"));
        }
        if rows.ncols() == 0 {
            return Err(Error::EmptyInput("sample set must have p >= 1"));
        }
        let n = rows.nrows();
        let violations = (0..n)
            .filter(|&i| rows.row(i).norm() > 1.0 + NORM_TOL)
            .count();
        Ok(Self {
            rows,
            norm_bound_held: violations == 0,
            norm_violation_fraction: violations as f64 / n as f64,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("sample set must have n >= 1"));
        }
        let p = rows[0].len();
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
        }
        let m = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::from_matrix(m)
    }

    /// Like [`SampleSet::from_matrix`] but rejects rows with norm above
    /// `1 + NORM_TOL` (the `enforce-norm` mode).
    pub fn from_matrix_enforced(rows: DMatrix<f64>) -> Result<Self> {
        let set = Self::from_matrix(rows)?;
        if !set.norm_bound_held {
            return Err(Error::InvalidParameter(format!(
                "{:.2}% of rows violate the unit norm bound",
                set.norm_violation_fraction * 100.0
            )));
        }
        Ok(set)
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn p(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.rows.row(i).iter().copied().collect()
    }

    pub fn norm_bound_held(&self) -> bool {
        self.norm_bound_held
    }

    pub fn norm_violation_fraction(&self) -> f64 {
        self.norm_violation_fraction
    }

    /// Projects every row with norm above 1 onto the unit ball.
    pub fn clip_to_unit_ball(self) -> Self {
        let mut rows = self.rows;
        for i in 0..rows.nrows() {
            let norm = rows.row(i).norm();
            if norm > 1.0 {
                let mut row = rows.row_mut(i);
                row /= norm;
            }
        }
        Self::from_matrix(rows).expect("dimensions unchanged by clipping")
    }
}
