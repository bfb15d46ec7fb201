//! Density operators and their Pauli-basis coefficient tables.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_deviation, hermitian_eigen};
use crate::pauli::{check_qubits, i_power, label_count, qubits_for_len, CMatrix, PauliLabel};
use crate::walsh::walsh_hadamard_in_place;

pub const STATE_TOL: f64 = 1e-10;

/// Imaginary residue allowed when reading `tr(P rho)`.
pub const REAL_PART_TOL: f64 = 1e-10;

/// Coefficients `r_P = tr(P rho)` over all `4^n` labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliVector {
    n: usize,
    coeffs: Vec<f64>,
}

impl PauliVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        let n = qubits_for_len(coeffs.len())?;
        Ok(Self { n, coeffs })
    }

    /// Coefficient table of the maximally mixed state.
    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let mut coeffs = vec![0.0; label_count(n)];
        coeffs[0] = 1.0;
        Ok(Self { n, coeffs })
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn get(&self, label: &PauliLabel) -> f64 {
        self.coeffs[label.index()]
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `2^{-n} sum_P r_P P` as a dense matrix (no positivity check).
    pub fn to_matrix(&self) -> CMatrix {
        let n = self.n;
        let dim = 1usize << n;
        let scale = 1.0 / dim as f64;
        let mut m = CMatrix::zeros(dim, dim);
        let mut buf = vec![Complex64::new(0.0, 0.0); dim];
        for x in 0..dim {
            for (z, slot) in buf.iter_mut().enumerate() {
                let r = self.coeffs[(z << n) | x];
                *slot = i_power((x & z).count_ones()) * r;
            }
            walsh_hadamard_in_place(&mut buf);
            // buf[w] = sum_z (-1)^{z.w} h(z); entry (c, c^x) reads w = c^x.
            for c in 0..dim {
                m[(c, c ^ x)] = buf[c ^ x] * scale;
            }
        }
        m
    }
}

/// Hermitian, positive semidefinite, unit-trace `2^n x 2^n` matrix.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    n: usize,
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates Hermiticity, trace and spectrum to [`STATE_TOL`].
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Skips the spectral check; used where positivity holds by construction.
    pub fn from_matrix_unchecked(matrix: CMatrix) -> Result<Self> {
        let dim = matrix.nrows();
        if dim != matrix.ncols() || dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidState(format!(
                "shape {}x{} is not 2^n square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n = dim.trailing_zeros() as usize;
        check_qubits(n)?;
        Ok(Self { n, matrix })
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1usize << n;
        let m = CMatrix::identity(dim, dim) * Complex64::from(1.0 / dim as f64);
        Ok(Self { n, matrix: m })
    }

    /// Projector onto a (normalized on the fly) state vector.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidState(format!("state vector length {dim}")));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let psi: Vec<Complex64> = amplitudes.iter().map(|a| a / norm).collect();
        let m = CMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj());
        Self::from_matrix_unchecked(m)
    }

    pub fn validate(&self) -> Result<()> {
        let dev = hermitian_deviation(&self.matrix);
        if dev > STATE_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = self.matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let (vals, _) = hermitian_eigen(&self.matrix)?;
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// `tr(P rho)` in O(2^n).
    pub fn expectation(&self, label: &PauliLabel) -> Result<f64> {
        if label.qubits() != self.n {
            return Err(Error::QubitMismatch(label.qubits(), self.n));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for col in 0..self.dim() {
            let (row, phase) = label.column_entry(col);
            acc += phase * self.matrix[(col, row)];
        }
        Ok(acc.re)
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|v| v.norm_sqr()).sum()
    }

    /// All `4^n` expectations in O(4^n n) via one Walsh transform per x-slice.
    pub fn to_pauli_vector(&self) -> PauliVector {
        pauli_coefficients(&self.matrix, self.n).0
    }

    pub fn from_pauli_vector(v: &PauliVector) -> Result<Self> {
        if (v.coeffs[0] - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "identity coefficient {} != 1",
                v.coeffs[0]
            )));
        }
        Self::new(v.to_matrix())
    }
}

/// Pauli coefficients of an arbitrary Hermitian matrix; rejects imaginary
/// residues above [`REAL_PART_TOL`].
pub fn pauli_vector_of_matrix(m: &CMatrix) -> Result<PauliVector> {
    let dim = m.nrows();
    if dim != m.ncols() || dim < 2 || !dim.is_power_of_two() {
        return Err(Error::InvalidState("matrix is not 2^n square".into()));
    }
    let n = dim.trailing_zeros() as usize;
    check_qubits(n)?;
    let (v, residue) = pauli_coefficients(m, n);
    if residue > REAL_PART_TOL {
        return Err(Error::NotHermitian(residue));
    }
    Ok(v)
}

fn pauli_coefficients(m: &CMatrix, n: usize) -> (PauliVector, f64) {
    let dim = 1usize << n;
    let mut coeffs = vec![0.0; label_count(n)];
    let mut buf = vec![Complex64::new(0.0, 0.0); dim];
    let mut residue = 0.0f64;
    for x in 0..dim {
        // tr(P_{x,z} rho) = i^{#Y} sum_c (-1)^{z.c} rho[c, c^x]
        for (c, slot) in buf.iter_mut().enumerate() {
            *slot = m[(c, c ^ x)];
        }
        walsh_hadamard_in_place(&mut buf);
        for (z, w) in buf.iter().enumerate() {
            let value = i_power((x & z).count_ones()) * w;
            residue = residue.max(value.im.abs());
            coeffs[(z << n) | x] = value.re;
        }
    }
    (PauliVector { n, coeffs }, residue)
}
