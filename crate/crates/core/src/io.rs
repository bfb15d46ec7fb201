//! Binary persistence for density operators and file helpers for the text
//! formats of Hamiltonians, magnitude tables and Bell counts.
//!
//! Binary layout (little endian):
//!
//! ```text
//! b"SHDM" | u16 version | u32 n | u8 family (0xFF = none) | u64 k | u64 seed
//! | 4^n (re: f64, im: f64) pairs, row major
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::density::DensityOperator;
use crate::error::{Error, Result};
use crate::pauli::{check_qubits, CMatrix};
use crate::states::StateFamily;

const MAGIC: &[u8; 4] = b"SHDM";
const VERSION: u16 = 1;
const NO_FAMILY: u8 = 0xFF;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateHeader {
    pub n: usize,
    pub family: Option<StateFamily>,
    pub k: u64,
    pub seed: u64,
}

pub fn write_density<W: Write>(mut w: W, header: &StateHeader, rho: &DensityOperator) -> Result<()> {
    if header.n != rho.qubits() {
        return Err(Error::QubitMismatch(header.n, rho.qubits()));
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.n as u32).to_le_bytes())?;
    w.write_all(&[header.family.map_or(NO_FAMILY, |f| f.code())])?;
    w.write_all(&header.k.to_le_bytes())?;
    w.write_all(&header.seed.to_le_bytes())?;
    let m = rho.matrix();
    let mut buf = Vec::with_capacity(16 * m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

/// Reads and validates a density operator.
pub fn read_density<R: Read>(mut r: R) -> Result<(StateHeader, DensityOperator)> {
    if &read_array::<4, _>(&mut r)? != MAGIC {
        return Err(Error::Format("not a density operator file".into()));
    }
    let version = u16::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = u32::from_le_bytes(read_array(&mut r)?) as usize;
    check_qubits(n)?;
    let code = read_array::<1, _>(&mut r)?[0];
    let family = match code {
        NO_FAMILY => None,
        c => Some(StateFamily::from_code(c).ok_or_else(|| Error::Format(format!("family code {c}")))?),
    };
    let k = u64::from_le_bytes(read_array(&mut r)?);
    let seed = u64::from_le_bytes(read_array(&mut r)?);
    let dim = 1usize << n;
    let mut buf = vec![0u8; 16 * dim * dim];
    r.read_exact(&mut buf)?;
    let f = |i: usize| f64::from_le_bytes(buf[8 * i..8 * i + 8].try_into().expect("8 bytes"));
    let m = CMatrix::from_fn(dim, dim, |row, col| {
        let i = 2 * (row * dim + col);
        Complex64::new(f(i), f(i + 1))
    });
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes".into()));
    }
    Ok((StateHeader { n, family, k, seed }, DensityOperator::new(m)?))
}

pub fn save_density(path: &Path, header: &StateHeader, rho: &DensityOperator) -> Result<()> {
    let mut bytes = Vec::new();
    write_density(&mut bytes, header, rho)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_density(path: &Path) -> Result<(StateHeader, DensityOperator)> {
    read_density(fs::read(path)?.as_slice())
}

pub fn save_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

pub fn load_text(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}
