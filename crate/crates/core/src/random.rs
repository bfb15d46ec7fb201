//! Random states for tests and benchmarks.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::density::DensityOperator;
use crate::pauli::CMatrix;

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Full-rank mixed state `G G^dagger / tr(G G^dagger)` from a complex Ginibre matrix.
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DensityOperator {
    random_density_rank(n, 1 << n, rng)
}

pub fn random_density_rank<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> DensityOperator {
    let dim = 1usize << n;
    let g = gaussian_matrix(dim, rank.max(1), rng);
    let mut m = &g * g.adjoint();
    let tr = m.trace().re;
    m /= Complex64::from(tr);
    DensityOperator::from_matrix_unchecked(m).expect("dimension is a power of two")
}

/// Haar-random pure state.
pub fn random_pure<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DensityOperator {
    random_density_rank(n, 1, rng)
}
