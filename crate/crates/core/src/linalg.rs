use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::CMatrix;

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 1_000_000;

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues (unsorted) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(DVector<f64>, CMatrix)> {
    let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::EigenFailure)?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure);
    }
    Ok((eig.eigenvalues, eig.eigenvectors))
}

pub fn spectral_norm_hermitian(m: &CMatrix) -> Result<f64> {
    let (vals, _) = hermitian_eigen(m)?;
    Ok(vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// `V diag(w) V^dagger`.
pub fn reassemble(vectors: &CMatrix, weights: &DVector<f64>) -> CMatrix {
    let mut scaled = vectors.clone();
    for (mut col, &w) in scaled.column_iter_mut().zip(weights.iter()) {
        col *= Complex64::from(w);
    }
    let mut out = &scaled * vectors.adjoint();
    // Symmetrize away round-off so downstream Hermitian checks stay tight.
    let dim = out.nrows();
    for j in 0..dim {
        out[(j, j)].im = 0.0;
        for i in 0..j {
            let avg = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
            out[(i, j)] = avg;
            out[(j, i)] = avg.conj();
        }
    }
    out
}
