//! Pauli strings in symplectic (x, z) form.
//!
//! A label on `n` qubits is a pair of `n`-bit masks. Qubit `j` carries
//! `I` for `(0, 0)`, `X` for `(1, 0)`, `Z` for `(0, 1)` and `Y` for `(1, 1)`.
//! Every table over the full label space is indexed by `(z << n) | x`.
//!
//! Bit `j` of a mask addresses the same qubit as bit `j` of a computational
//! basis index, so the leftmost character of a Pauli string is the most
//! significant bit and the leftmost Kronecker factor.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 12;

pub type CMatrix = DMatrix<Complex64>;

pub(crate) fn check_qubits(n: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n) {
        Ok(())
    } else {
        Err(Error::QubitCount {
            n,
            min: 1,
            max: MAX_QUBITS,
        })
    }
}

/// Number of labels on `n` qubits.
#[inline]
pub fn label_count(n: usize) -> usize {
    1usize << (2 * n)
}

/// Recovers `n` from a table length of `4^n`.
pub fn qubits_for_len(len: usize) -> Result<usize> {
    if len < 4 || !len.is_power_of_two() || len.trailing_zeros() % 2 != 0 {
        return Err(Error::BadLength(len));
    }
    let n = (len.trailing_zeros() / 2) as usize;
    check_qubits(n).map_err(|_| Error::BadLength(len))?;
    Ok(n)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliLabel {
    x: u32,
    z: u32,
    n: u8,
}

impl PauliLabel {
    pub fn new(x_bits: u32, z_bits: u32, n: usize) -> Result<Self> {
        check_qubits(n)?;
        let mask = (1u32 << n) - 1;
        if x_bits & !mask != 0 || z_bits & !mask != 0 {
            return Err(Error::LabelRange { n });
        }
        Ok(Self {
            x: x_bits,
            z: z_bits,
            n: n as u8,
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(0, 0, n)
    }

    /// Label stored at position `index` of a `4^n` table.
    pub fn from_index(index: usize, n: usize) -> Result<Self> {
        check_qubits(n)?;
        if index >= label_count(n) {
            return Err(Error::LabelRange { n });
        }
        let mask = (1usize << n) - 1;
        Ok(Self {
            x: (index & mask) as u32,
            z: (index >> n) as u32,
            n: n as u8,
        })
    }

    #[inline]
    pub fn index(&self) -> usize {
        ((self.z as usize) << self.n) | self.x as usize
    }

    #[inline]
    pub fn x_bits(&self) -> u32 {
        self.x
    }

    #[inline]
    pub fn z_bits(&self) -> u32 {
        self.z
    }

    #[inline]
    pub fn qubits(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Commutation bit: 0 if the two strings commute, 1 if they anticommute.
    pub fn symplectic_product(&self, other: &PauliLabel) -> Result<u8> {
        if self.n != other.n {
            return Err(Error::QubitMismatch(self.qubits(), other.qubits()));
        }
        Ok(symplectic_bit(self.index(), other.index(), self.qubits()))
    }

    pub fn commutes_with(&self, other: &PauliLabel) -> Result<bool> {
        Ok(self.symplectic_product(other)? == 0)
    }

    /// Number of non-identity tensor factors.
    #[inline]
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    #[inline]
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// `P^T = transpose_sign(P) * P`.
    #[inline]
    pub fn transpose_sign(&self) -> i8 {
        if self.y_count() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// Group product up to phase (bitwise XOR of the masks).
    pub fn xor(&self, other: &PauliLabel) -> Result<PauliLabel> {
        if self.n != other.n {
            return Err(Error::QubitMismatch(self.qubits(), other.qubits()));
        }
        Ok(PauliLabel {
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            n: self.n,
        })
    }

    /// Dense `2^n x 2^n` matrix with textbook single-qubit factors.
    pub fn to_dense(&self) -> CMatrix {
        let dim = 1usize << self.n;
        let mut m = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            let (row, phase) = self.column_entry(col);
            m[(row, col)] = phase;
        }
        m
    }

    /// The single nonzero entry of column `col`: `P |col> = phase |row>`.
    #[inline]
    pub fn column_entry(&self, col: usize) -> (usize, Complex64) {
        let row = col ^ self.x as usize;
        let sign = if (self.z as usize & col).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        (row, i_power(self.y_count()) * sign)
    }

    /// Adds `coeff * P` to a dense matrix in O(2^n).
    pub fn add_scaled_to(&self, matrix: &mut CMatrix, coeff: f64) {
        let dim = 1usize << self.n;
        debug_assert_eq!(matrix.nrows(), dim);
        for col in 0..dim {
            let (row, phase) = self.column_entry(col);
            matrix[(row, col)] += phase * coeff;
        }
    }

    /// Iterates over all `4^n` labels in index order.
    pub fn all(n: usize) -> Result<impl Iterator<Item = PauliLabel>> {
        check_qubits(n)?;
        Ok((0..label_count(n)).map(move |i| PauliLabel::from_index(i, n).unwrap()))
    }
}

/// Dense matrix of a label; see [`PauliLabel::to_dense`].
pub fn dense_pauli(label: &PauliLabel) -> CMatrix {
    label.to_dense()
}

/// Commutation bit between two table indices on `n` qubits.
#[inline]
pub fn symplectic_bit(a: usize, b: usize, n: usize) -> u8 {
    let mask = (1usize << n) - 1;
    let (ax, az) = (a & mask, a >> n);
    let (bx, bz) = (b & mask, b >> n);
    (((ax & bz).count_ones() + (az & bx).count_ones()) & 1) as u8
}

/// `(-1)^{#Y}` for a table index.
#[inline]
pub fn transpose_sign_of(index: usize, n: usize) -> f64 {
    let mask = (1usize << n) - 1;
    if ((index & mask) & (index >> n)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
pub(crate) fn i_power(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

impl fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in (0..self.n).rev() {
            let c = match ((self.x >> q) & 1, (self.z >> q) & 1) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (0, 1) => 'Z',
                _ => 'Y',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliLabel({self})")
    }
}

impl FromStr for PauliLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s.chars().count();
        check_qubits(n).map_err(|_| Error::ParseLabel(s.to_string()))?;
        let (mut x, mut z) = (0u32, 0u32);
        for (pos, c) in s.chars().enumerate() {
            let bit = 1u32 << (n - 1 - pos);
            match c.to_ascii_uppercase() {
                'I' => {}
                'X' => x |= bit,
                'Z' => z |= bit,
                'Y' => {
                    x |= bit;
                    z |= bit;
                }
                _ => return Err(Error::ParseLabel(s.to_string())),
            }
        }
        PauliLabel::new(x, z, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliLabel {
        s.parse().unwrap()
    }

    fn commutator_vanishes(a: &PauliLabel, b: &PauliLabel) -> bool {
        let (ma, mb) = (a.to_dense(), b.to_dense());
        let c = &ma * &mb - &mb * &ma;
        c.iter().all(|v| v.norm() < 1e-12)
    }

    #[test]
    fn symplectic_product_examples() {
        assert_eq!(p("X").symplectic_product(&p("Z")).unwrap(), 1);
        for s in ["I", "X", "Y", "Z", "XY", "ZZY"] {
            assert_eq!(p(s).symplectic_product(&p(s)).unwrap(), 0);
        }
        assert_eq!(p("XX").symplectic_product(&p("YY")).unwrap(), 0);
        assert!(commutator_vanishes(&p("XX"), &p("YY")));
    }

    #[test]
    fn mismatched_qubits_rejected() {
        assert!(matches!(
            p("X").symplectic_product(&p("XZ")),
            Err(Error::QubitMismatch(1, 2))
        ));
    }

    #[test]
    fn weight_and_y_count() {
        assert_eq!(PauliLabel::identity(3).unwrap().weight(), 0);
        assert_eq!(p("XIZ").weight(), 2);
        assert_eq!(p("YYYYY").weight(), 5);
        assert_eq!((p("Y").y_count(), p("Y").transpose_sign()), (1, -1));
        assert_eq!((p("XZ").y_count(), p("XZ").transpose_sign()), (0, 1));
        assert_eq!((p("YY").y_count(), p("YY").transpose_sign()), (2, 1));
    }

    #[test]
    fn dense_single_qubit() {
        let id = PauliLabel::identity(1).unwrap().to_dense();
        assert_eq!(id, CMatrix::identity(2, 2));
        let z = p("Z").to_dense();
        assert_eq!(z[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(z[(1, 1)], Complex64::new(-1.0, 0.0));
        assert_eq!(z[(0, 1)], Complex64::new(0.0, 0.0));
        let y = p("Y").to_dense();
        assert_eq!(y[(0, 1)], Complex64::new(0.0, -1.0));
        assert_eq!(y[(1, 0)], Complex64::new(0.0, 1.0));
    }

    #[test]
    fn dense_matches_kronecker_of_factors() {
        let single = |c: char| p(&c.to_string()).to_dense();
        for s in ["XZ", "YI", "ZYX", "IYY"] {
            let mut chars = s.chars();
            let mut m = single(chars.next().unwrap());
            for c in chars {
                m = m.kronecker(&single(c));
            }
            assert_eq!(m, p(s).to_dense(), "{s}");
        }
        let xz = p("XZ").to_dense();
        let ident = CMatrix::identity(4, 4);
        assert!((&xz * xz.adjoint() - &ident).norm() < 1e-14);
        assert!((xz.adjoint() - &xz).norm() < 1e-14);
        assert!(xz.trace().norm() < 1e-14);
    }

    #[test]
    fn exhaustive_algebra_small_n() {
        for n in 1..=3 {
            let labels: Vec<_> = PauliLabel::all(n).unwrap().collect();
            let dense: Vec<_> = labels.iter().map(|l| l.to_dense()).collect();
            let dim = 1 << n;
            for (a, ma) in labels.iter().zip(&dense) {
                assert!((ma * ma - CMatrix::identity(dim, dim)).norm() < 1e-12);
                let sign = a.transpose_sign() as f64;
                assert!((ma.transpose() - ma * Complex64::from(sign)).norm() < 1e-12);
                for (b, mb) in labels.iter().zip(&dense) {
                    let f = a.symplectic_product(b).unwrap();
                    assert_eq!(f, b.symplectic_product(a).unwrap());
                    let s = if f == 0 { 1.0 } else { -1.0 };
                    let lhs = ma * mb;
                    let rhs = mb * ma * Complex64::from(s);
                    assert!((lhs - rhs).norm() < 1e-12, "{a} {b}");
                    for c in &labels {
                        let ac = a.xor(c).unwrap();
                        assert_eq!(
                            ac.symplectic_product(b).unwrap(),
                            f ^ c.symplectic_product(b).unwrap()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn index_round_trip_and_display() {
        for n in 1..=4 {
            for (i, l) in PauliLabel::all(n).unwrap().enumerate() {
                assert_eq!(l.index(), i);
                assert_eq!(l.to_string().parse::<PauliLabel>().unwrap(), l);
            }
        }
        assert_eq!(p("XIZ").x_bits(), 0b100);
        assert_eq!(p("XIZ").z_bits(), 0b001);
        assert!("XQ".parse::<PauliLabel>().is_err());
        assert!(PauliLabel::new(4, 0, 2).is_err());
    }

    #[test]
    fn qubits_for_len_checks() {
        assert_eq!(qubits_for_len(16).unwrap(), 2);
        assert!(qubits_for_len(8).is_err());
        assert!(qubits_for_len(0).is_err());
        assert!(qubits_for_len(1).is_err());
    }
}
