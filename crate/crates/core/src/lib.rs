//! Classical simulation of two-copy Pauli shadow tomography.
//!
//! The pipeline has three measured stages on an unknown `n`-qubit state:
//!
//! 1. Bell sampling of `rho ⊗ rho` estimates every magnitude `|tr(P rho)|`
//!    ([`support`]).
//! 2. A matrix-multiplicative-weights search finds a Gibbs state `sigma`
//!    whose large Pauli expectations sit where those of `rho` do
//!    ([`mimic`]).
//! 3. Bell sampling of `rho ⊗ sigma` recovers the signs ([`signs`]).
//!
//! Everything runs on dense `2^n x 2^n` matrices and `4^n` coefficient
//! tables, so practical sizes are `n <= 7`.

pub mod bell;
pub mod density;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mimic;
pub mod pauli;
pub mod random;
pub mod schedule;
pub mod signs;
pub mod states;
pub mod support;
pub mod walsh;

pub use density::{DensityOperator, PauliVector};
pub use error::{Error, Result};
pub use pauli::{dense_pauli, PauliLabel};
pub use states::{PauliHamiltonian, StateFamily, TestStateSpec};

/// `sgn` with the tie rule `sgn(0) = +1` used throughout.
#[inline]
pub fn sign_of(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}
