//! Lyapunov stability of the internal dynamics and quadratic certificates.

mod certificate;
mod classify;
mod sampling;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use certificate::{construct_v1, solve_continuous_lyapunov, CERTIFICATE_RESIDUAL_TOL};
pub use classify::{classify_stability, default_tolerance, AxisEigenvalue, Classification, StabilityVerdict};
pub use sampling::{halton_points, sampled_positive_definite, PdVerdict, SamplingError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LyapunovError {
    #[error("matrix must have order >= 1")]
    Empty,
    #[error("row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("eigenvalue iteration did not converge")]
    EigenNonConvergence,
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("matrix is not Lyapunov stable ({0:?}); no quadratic certificate exists")]
    NotLyapunovStable(Classification),
    #[error("block-diagonalizing transform is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("linear system is singular")]
    Singular,
    #[error("certificate check failed: min eig(P) = {min_eig:.3e}, max eig(A'P + PA) = {max_residual:.3e}")]
    CertificateRejected { min_eig: f64, max_residual: f64 },
}

/// A real square matrix of order >= 1 with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SquareMatrix(DMatrix<f64>);

impl SquareMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self, LyapunovError> {
        if m.nrows() == 0 {
            return Err(LyapunovError::Empty);
        }
        if m.nrows() != m.ncols() {
            return Err(LyapunovError::NotSquare {
                row: 0,
                len: m.ncols(),
                expected: m.nrows(),
            });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(LyapunovError::NonFinite);
        }
        Ok(Self(m))
    }

    /// Build from row-major nested rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LyapunovError> {
        let n = rows.len();
        if n == 0 {
            return Err(LyapunovError::Empty);
        }
        for (i, r) in rows.iter().enumerate() {
            if r.as_ref().len() != n {
                return Err(LyapunovError::NotSquare {
                    row: i,
                    len: r.as_ref().len(),
                    expected: n,
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i].as_ref()[j]))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn scalar(x: f64) -> Self {
        Self(DMatrix::from_element(1, 1, x))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.order())
            .map(|i| self.0.row(i).iter().copied().collect())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (&self.0 - self.0.transpose()).amax() <= tol
    }
}

impl TryFrom<Vec<Vec<f64>>> for SquareMatrix {
    type Error = LyapunovError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Self::from_rows(&rows)
    }
}

impl From<SquareMatrix> for Vec<Vec<f64>> {
    fn from(m: SquareMatrix) -> Self {
        m.to_rows()
    }
}
