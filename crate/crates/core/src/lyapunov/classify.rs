use nalgebra::{DMatrix, Schur, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{LyapunovError, SquareMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Hurwitz,
    MarginallyStable,
    Unstable,
}

/// A cluster of eigenvalues on (or within `tol` of) the imaginary axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisEigenvalue {
    pub re: f64,
    pub im: f64,
    pub algebraic: usize,
    pub geometric: usize,
}

impl AxisEigenvalue {
    pub fn is_semisimple(&self) -> bool {
        self.geometric >= self.algebraic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub classification: Classification,
    /// All eigenvalues as `[re, im]` pairs.
    pub eigenvalues: Vec<[f64; 2]>,
    pub axis: Vec<AxisEigenvalue>,
    pub det_nonzero: bool,
    pub tol: f64,
}

impl StabilityVerdict {
    pub fn is_lyapunov_stable(&self) -> bool {
        self.classification != Classification::Unstable
    }
}

/// `1e-9 * ||A||_F`, or `1e-9` for the zero matrix.
pub fn default_tolerance(a: &SquareMatrix) -> f64 {
    let n = a.frobenius_norm();
    1e-9 * if n > 0.0 { n } else { 1.0 }
}

pub(crate) fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>, LyapunovError> {
    let n = a.nrows();
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 1000 * n.max(1))
        .ok_or(LyapunovError::EigenNonConvergence)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Group eigenvalues that lie within `radius` of the first member of a group.
pub(crate) fn cluster(mut eigs: Vec<Complex64>, radius: f64) -> Vec<Vec<Complex64>> {
    eigs.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    let mut out: Vec<Vec<Complex64>> = Vec::new();
    for l in eigs {
        match out.iter_mut().find(|c| (c[0] - l).norm() <= radius) {
            Some(c) => c.push(l),
            None => out.push(vec![l]),
        }
    }
    out
}

/// Dimension of the numerical null space of `A - lambda I`.
pub(crate) fn geometric_multiplicity(a: &DMatrix<f64>, lambda: Complex64, rank_tol: f64) -> usize {
    let n = a.nrows();
    let shifted = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
        Complex64::new(a[(i, j)], 0.0) - d
    });
    let svd = SVD::new(shifted, false, false);
    svd.singular_values.iter().filter(|s| **s <= rank_tol).count()
}

/// Decide whether `A` is Hurwitz, Lyapunov (marginally) stable, or unstable.
///
/// Real parts within `tol` of zero count as on the imaginary axis. An axis
/// eigenvalue is semisimple when the numerical null space of `A - lambda I`
/// has the eigenvalue's full algebraic multiplicity.
pub fn classify_stability(a: &SquareMatrix, tol: f64) -> Result<StabilityVerdict, LyapunovError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(LyapunovError::BadTolerance(tol));
    }
    let m = a.as_matrix();
    let eigs = eigenvalues(m)?;
    let scale = a.frobenius_norm().max(1.0);

    let det_nonzero = eigs.iter().all(|l| l.norm() > tol);
    let right_half = eigs.iter().any(|l| l.re > tol);
    let on_axis: Vec<Complex64> = eigs.iter().copied().filter(|l| l.re.abs() <= tol).collect();

    // Defective eigenvalues split by ~sqrt(eps) under rounding, so clusters use
    // a radius well above `tol`.
    let radius = (tol * scale).sqrt();
    let axis: Vec<AxisEigenvalue> = cluster(on_axis, radius)
        .into_iter()
        .map(|c| {
            let k = c.len();
            let mean = c.iter().sum::<Complex64>() / k as f64;
            let spread = c.iter().map(|l| (l - mean).norm()).fold(0.0, f64::max);
            let geometric = geometric_multiplicity(m, mean, tol.max(4.0 * spread));
            AxisEigenvalue {
                re: mean.re,
                im: mean.im,
                algebraic: k,
                geometric,
            }
        })
        .collect();

    let classification = if right_half {
        Classification::Unstable
    } else if axis.is_empty() {
        Classification::Hurwitz
    } else if axis.iter().all(AxisEigenvalue::is_semisimple) {
        Classification::MarginallyStable
    } else {
        Classification::Unstable
    };

    Ok(StabilityVerdict {
        classification,
        eigenvalues: eigs.iter().map(|l| [l.re, l.im]).collect(),
        axis,
        det_nonzero,
        tol,
    })
}
