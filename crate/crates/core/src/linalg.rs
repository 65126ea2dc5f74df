//! Dense helpers shared by the topology, game and step-size modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Convergence threshold handed to the symmetric eigensolver.
pub const EIGEN_TOL: f64 = 1e-14;

fn symmetric_eigenvalues(m: DMatrix<f64>) -> DVector<f64> {
    // max_niter = 0 lets the solver iterate until the threshold is met.
    SymmetricEigen::try_new(m, EIGEN_TOL, 0)
        .map(|e| e.eigenvalues)
        .expect("symmetric eigensolver did not converge")
}

/// Largest singular value, via the eigenvalues of the smaller Gram matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    let sym = (&gram + gram.transpose()) * 0.5;
    symmetric_eigenvalues(sym).max().max(0.0).sqrt()
}

/// Smallest eigenvalue of the symmetric part `(M + Mᵀ)/2`.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    assert_eq!(m.nrows(), m.ncols(), "square matrix required");
    let sym = (m + m.transpose()) * 0.5;
    symmetric_eigenvalues(sym).min()
}

/// 2-norm condition number from the singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let lo = sv.min();
    if lo == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / lo
    }
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}
