//! Walsh-Hadamard butterflies over Pauli-indexed tables.
//!
//! The symplectic form `sp(a, b) = a.x·b.z + a.z·b.x` is the ordinary dot
//! product after swapping the x and z halves of one argument, so the
//! symplectic transform is a plain Walsh-Hadamard transform followed by a
//! half-swap of the output index.

use crate::error::Result;
use crate::pauli::qubits_for_len;

/// In-place unnormalized Walsh-Hadamard transform of a power-of-two slice.
pub fn walsh_hadamard_in_place<T>(data: &mut [T])
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let len = data.len();
    debug_assert!(len.is_power_of_two());
    let mut half = 1;
    while half < len {
        for block in data.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        half <<= 1;
    }
}

/// Swaps the x and z halves of a label index.
#[inline]
pub fn swap_halves(index: usize, n: usize) -> usize {
    let mask = (1usize << n) - 1;
    ((index & mask) << n) | (index >> n)
}

/// `out[a] = sum_b (-1)^{sp(a,b)} v[b]` in O(4^n * 2n).
///
/// Applying it twice multiplies by `4^n`.
pub fn symplectic_walsh(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    symplectic_walsh_in_place(&mut out)?;
    Ok(out)
}

pub fn symplectic_walsh_in_place(v: &mut [f64]) -> Result<()> {
    let n = qubits_for_len(v.len())?;
    walsh_hadamard_in_place(v);
    permute_swap_halves(v, n);
    Ok(())
}

// The half-swap is an involution made of disjoint transpositions.
fn permute_swap_halves(v: &mut [f64], n: usize) {
    for i in 0..v.len() {
        let j = swap_halves(i, n);
        if j > i {
            v.swap(i, j);
        }
    }
}

/// Quadratic-time reference used to cross-check the butterfly.
pub fn symplectic_walsh_direct(v: &[f64]) -> Result<Vec<f64>> {
    let n = qubits_for_len(v.len())?;
    Ok((0..v.len())
        .map(|a| {
            v.iter()
                .enumerate()
                .map(|(b, &vb)| {
                    if crate::pauli::symplectic_bit(a, b, n) == 0 {
                        vb
                    } else {
                        -vb
                    }
                })
                .sum()
        })
        .collect())
}
