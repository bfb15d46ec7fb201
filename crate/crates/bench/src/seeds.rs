//! Deterministic seed derivation for independent runs.

use shadow_core::mimic::Variant;
use shadow_core::StateFamily;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds each word into the state with a golden-ratio increment and a
/// finalizer round, so that field order matters.
pub fn hash_words(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0u64, |h, &w| mix64(h.wrapping_add(GOLDEN) ^ w))
}

pub fn variant_code(v: Option<Variant>) -> u64 {
    match v {
        None => 0,
        Some(Variant::V1) => 1,
        Some(Variant::V2) => 2,
    }
}

/// Identifies one run within a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RunKey {
    pub family: StateFamily,
    pub n: usize,
    pub k: u64,
    pub state_seed: u64,
    pub mu_index: usize,
    pub seed_index: usize,
    pub stage: u8,
    pub variant: Option<Variant>,
    pub trial: u32,
}

impl RunKey {
    pub fn run_seed(&self, master: u64) -> u64 {
        hash_words(&[
            master,
            self.family.code() as u64,
            self.n as u64,
            self.k,
            self.state_seed,
            self.stage as u64,
            variant_code(self.variant),
            self.trial as u64,
            self.mu_index as u64,
            self.seed_index as u64,
        ])
    }
}

/// Hamiltonian sampling seed for the `j`-th Gibbs state of a suite.
pub fn state_seed(master: u64, n: usize, j: usize) -> u64 {
    hash_words(&[master, 0x5747_4154, n as u64, j as u64])
}
