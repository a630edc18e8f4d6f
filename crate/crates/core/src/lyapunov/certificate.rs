use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use super::classify::{Classification, StabilityVerdict};
use super::{LyapunovError, SquareMatrix};

/// Relative bound on `max eig(A'P + PA) / ||P||` accepted for a certificate.
pub const CERTIFICATE_RESIDUAL_TOL: f64 = 1e-8;

const MAX_TRANSFORM_CONDITION: f64 = 1e10;

/// Solve `A'P + PA = -Q` through the Kronecker form, with one step of
/// iterative refinement. Intended for the small orders met in normal forms.
pub fn solve_continuous_lyapunov(
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LyapunovError> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    // vec(A'P) = (I (x) A') vec(P), vec(PA) = (A' (x) I) vec(P), column-major vec
    let k = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let lu = k.clone().lu();
    let mut x = lu.solve(&rhs).ok_or(LyapunovError::Singular)?;
    let r = &rhs - &k * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LyapunovError::Singular);
    }
    let p = DMatrix::from_column_slice(n, n, x.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// Basis vectors (right singular vectors) of the numerical null space of
/// `A - lambda I`, taking the `k` smallest singular directions.
fn null_vectors(a: &DMatrix<f64>, lambda: Complex64, k: usize) -> Vec<nalgebra::DVector<Complex64>> {
    let n = a.nrows();
    let shifted = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
        Complex64::new(a[(i, j)], 0.0) - d
    });
    let svd = SVD::new(shifted, false, true);
    let vt = svd.v_t.expect("requested V");
    (n - k..n)
        .map(|r| vt.row(r).transpose().map(|c| c.conj()))
        .collect()
}

/// Real basis of the invariant subspace belonging to the imaginary-axis
/// eigenvalues. Each conjugate pair `+-j w` contributes `Re v, Im v` for
/// every eigenvector `v` of `+j w`, so `A` acts on the pair as `[[0, w], [-w, 0]]`.
fn centre_basis(a: &DMatrix<f64>, verdict: &StabilityVerdict, radius: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for c in &verdict.axis {
        if c.im < -radius {
            continue;
        }
        let lambda = Complex64::new(c.re, c.im);
        if c.im.abs() <= radius {
            for v in null_vectors(a, Complex64::new(c.re, 0.0), c.algebraic) {
                cols.push(v.map(|z| z.re));
            }
        } else {
            // unit v gives |Re v|^2 + |Im v|^2 = 1; rescale so a normal A maps to P = I
            for v in null_vectors(a, lambda, c.algebraic) {
                cols.push(v.map(|z| z.re * std::f64::consts::SQRT_2));
                cols.push(v.map(|z| z.im * std::f64::consts::SQRT_2));
            }
        }
    }
    if cols.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    DMatrix::from_columns(&cols)
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = SVD::new(m.clone(), false, false).singular_values;
    let max = s.max();
    let min = s.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Quadratic certificate `V1(z) = z'Pz` for a Lyapunov-stable matrix:
/// `P` symmetric positive definite with `A'P + PA <= 0`.
///
/// Hurwitz matrices solve `A'P + PA = -I`. Marginally stable matrices are
/// block-diagonalized into a Hurwitz part and a skew-symmetric
/// imaginary-axis part; the latter takes the identity as its certificate.
/// Every result is re-checked by direct multiplication before it is returned.
pub fn construct_v1(a: &SquareMatrix, verdict: &StabilityVerdict) -> Result<SquareMatrix, LyapunovError> {
    let m = a.as_matrix();
    let n = m.nrows();
    let p = match verdict.classification {
        Classification::Unstable => {
            return Err(LyapunovError::NotLyapunovStable(verdict.classification))
        }
        Classification::Hurwitz => solve_continuous_lyapunov(m, &DMatrix::identity(n, n))?,
        Classification::MarginallyStable => {
            let radius = (verdict.tol * a.frobenius_norm().max(1.0)).sqrt();
            let tc = centre_basis(m, verdict, radius);
            let k = tc.ncols();
            let mut t = DMatrix::zeros(n, n);
            t.columns_mut(0, k).copy_from(&tc);
            if k < n {
                // the stable subspace is the annihilator of the left centre
                // subspace; A' has the same axis eigenvalues as A
                let wc = centre_basis(&m.transpose(), verdict, radius);
                let gram = &wc * wc.transpose();
                let svd = SVD::new(gram, true, false);
                let u = svd.u.expect("requested U");
                t.columns_mut(k, n - k).copy_from(&u.columns(k, n - k));
            }
            let cond = condition_number(&t);
            if cond > MAX_TRANSFORM_CONDITION {
                return Err(LyapunovError::IllConditioned(cond));
            }
            let t_inv = t.clone().try_inverse().ok_or(LyapunovError::Singular)?;
            let mut core = DMatrix::<f64>::identity(n, n);
            if k < n {
                let b = &t_inv * m * &t;
                let hurwitz = b.view((k, k), (n - k, n - k)).into_owned();
                let ph = solve_continuous_lyapunov(&hurwitz, &DMatrix::identity(n - k, n - k))?;
                core.view_mut((k, k), (n - k, n - k)).copy_from(&ph);
            }
            let p = t_inv.transpose() * core * &t_inv;
            (&p + p.transpose()) * 0.5
        }
    };
    check_certificate(m, &p)?;
    SquareMatrix::new(p)
}

fn check_certificate(a: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<(), LyapunovError> {
    let eig_p = SymmetricEigen::new(p.clone()).eigenvalues;
    let min_eig = eig_p.min();
    let norm_p = eig_p.amax();
    let lyap = a.transpose() * p + p * a;
    let lyap = (&lyap + lyap.transpose()) * 0.5;
    let max_residual = SymmetricEigen::new(lyap).eigenvalues.max();
    if !(min_eig > 0.0) || !(max_residual <= CERTIFICATE_RESIDUAL_TOL * norm_p) {
        return Err(LyapunovError::CertificateRejected { min_eig, max_residual });
    }
    Ok(())
}
