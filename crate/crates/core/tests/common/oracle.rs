//! Dense reference computations, independent of the symplectic fast paths.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type M = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn single(ch: char) -> M {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match ch {
        'I' => M::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => M::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => M::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => M::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => panic!("bad Pauli character {ch}"),
    }
}

/// Kronecker product of single-qubit factors, leftmost character first.
pub fn pauli_from_string(s: &str) -> M {
    s.chars().fold(M::identity(1, 1), |acc, ch| acc.kronecker(&single(ch)))
}

/// Every label string of length `n`, in the library's index order.
pub fn label_strings(n: usize) -> Vec<String> {
    shadow_core::PauliLabel::all(n).unwrap().map(|p| p.to_string()).collect()
}

pub fn trace_product(a: &M, b: &M) -> f64 {
    (a * b).trace().re
}

/// `(P_a ⊗ I) |Φ>` with `|Φ> = 2^{-n/2} Σ_c |c>|c>`, first register leading.
pub fn bell_vector(label: &str) -> nalgebra::DVector<Complex64> {
    let n = label.len();
    let dim = 1usize << n;
    let norm = (dim as f64).sqrt().recip();
    let mut phi = nalgebra::DVector::<Complex64>::zeros(dim * dim);
    for k in 0..dim {
        phi[k * dim + k] = c(norm, 0.0);
    }
    let op = pauli_from_string(label).kronecker(&M::identity(dim, dim));
    op * phi
}

/// `Pr[a] = <Φ_a| rho ⊗ sigma |Φ_a>` for every label `a`.
pub fn bell_probs_dense(rho: &M, sigma: &M) -> Vec<f64> {
    let n = rho.nrows().trailing_zeros() as usize;
    let joint = rho.kronecker(sigma);
    label_strings(n)
        .iter()
        .map(|a| {
            let v = bell_vector(a);
            (v.adjoint() * &joint * &v)[(0, 0)].re
        })
        .collect()
}

/// `<Φ_a| P ⊗ P |Φ_a>`.
pub fn pair_eigenvalue_dense(p: &str, a: &str) -> f64 {
    let v = bell_vector(a);
    let pp = pauli_from_string(p);
    let op = pp.kronecker(&pp);
    (v.adjoint() * op * &v)[(0, 0)].re
}
