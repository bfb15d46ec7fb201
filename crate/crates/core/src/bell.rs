//! Transversal Bell-basis measurements on `rho ⊗ sigma`.
//!
//! Outcome `a` is the Pauli label of the Bell state `(P_a ⊗ I)|Φ⟩`, where
//! `|Φ⟩ = 2^{-n/2} Σ_i |i⟩|i⟩`. The outcome distribution is
//!
//! ```text
//! Pr[a] = 2^{-n} tr(P_a rho P_a sigma^T)
//!       = 4^{-n} Σ_b (-1)^{sp(a,b)} (-1)^{#Y(b)} tr(P_b rho) tr(P_b sigma)
//! ```
//!
//! so one symplectic Walsh transform of a pointwise product produces the
//! whole table. `P ⊗ P` acts on `|Φ_a⟩` with eigenvalue
//! `(-1)^{#Y(P) + sp(a,P)}`, and the same transform turns outcome counts into
//! estimates of `tr(P rho) tr(P sigma)` for every `P` at once.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::density::{DensityOperator, PauliVector};
use crate::error::{Error, Result};
use crate::pauli::{label_count, qubits_for_len, transpose_sign_of, PauliLabel};
use crate::walsh::symplectic_walsh_in_place;

pub const NEGATIVE_CLAMP_TOL: f64 = 1e-12;
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Exact Bell outcome distribution with an alias table for O(1) draws.
#[derive(Clone, Debug)]
pub struct BellDistribution {
    n: usize,
    probs: Vec<f64>,
    alias: Option<WeightedAliasIndex<f64>>,
}

impl BellDistribution {
    /// Wraps an explicit probability table (clamping and normalization rules apply).
    pub fn from_probs(mut probs: Vec<f64>) -> Result<Self> {
        let n = qubits_for_len(probs.len())?;
        let mut worst = 0.0f64;
        for p in probs.iter_mut() {
            if !p.is_finite() {
                return Err(Error::Normalization(f64::NAN));
            }
            if *p < 0.0 {
                worst = worst.min(*p);
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL || worst < -NORMALIZATION_TOL {
            return Err(Error::Normalization(total));
        }
        for p in probs.iter_mut() {
            *p /= total;
        }
        // WeightedAliasIndex rejects tables whose weights sum to zero; that cannot
        // happen here, but zero-weight entries are fine.
        let alias = WeightedAliasIndex::new(probs.clone()).ok();
        Ok(Self { n, probs, alias })
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// One outcome label index.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.alias {
            Some(a) => a.sample(rng),
            None => 0,
        }
    }

    /// `E[ê_P]` under this distribution, i.e. infinite-sample estimates.
    pub fn expected_products(&self) -> Vec<f64> {
        let mut w = self.probs.clone();
        symplectic_walsh_in_place(&mut w).expect("length is 4^n");
        for (i, v) in w.iter_mut().enumerate() {
            *v *= transpose_sign_of(i, self.n);
        }
        w
    }
}

/// Outcome distribution of `rho ⊗ sigma`.
pub fn bell_distribution(rho: &DensityOperator, sigma: &DensityOperator) -> Result<BellDistribution> {
    if rho.qubits() != sigma.qubits() {
        return Err(Error::QubitMismatch(rho.qubits(), sigma.qubits()));
    }
    bell_distribution_from_vectors(&rho.to_pauli_vector(), &sigma.to_pauli_vector())
}

/// Same as [`bell_distribution`] from precomputed Pauli vectors.
pub fn bell_distribution_from_vectors(rho: &PauliVector, sigma: &PauliVector) -> Result<BellDistribution> {
    if rho.qubits() != sigma.qubits() {
        return Err(Error::QubitMismatch(rho.qubits(), sigma.qubits()));
    }
    let n = rho.qubits();
    let mut w: Vec<f64> = rho
        .coeffs()
        .iter()
        .zip(sigma.coeffs())
        .enumerate()
        .map(|(b, (r, s))| transpose_sign_of(b, n) * r * s)
        .collect();
    symplectic_walsh_in_place(&mut w)?;
    let scale = 1.0 / label_count(n) as f64;
    for p in w.iter_mut() {
        *p *= scale;
        if *p < 0.0 && *p >= -NEGATIVE_CLAMP_TOL {
            *p = 0.0;
        }
    }
    if let Some(bad) = w.iter().copied().find(|&p| p < -NEGATIVE_CLAMP_TOL) {
        return Err(Error::Normalization(bad));
    }
    BellDistribution::from_probs(w)
}

/// Eigenvalue of `P ⊗ P` on the Bell state labelled `a`.
pub fn bell_pair_eigenvalue(p: &PauliLabel, a: &PauliLabel) -> Result<i8> {
    let sp = a.symplectic_product(p)?;
    Ok(if (p.y_count() + sp as u32) % 2 == 0 { 1 } else { -1 })
}

/// Outcome histogram over all `4^n` Bell labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BellSampleCounts {
    n: usize,
    counts: Vec<u64>,
    total: u64,
}

impl BellSampleCounts {
    pub fn new(n: usize) -> Result<Self> {
        crate::pauli::check_qubits(n)?;
        Ok(Self {
            n,
            counts: vec![0; label_count(n)],
            total: 0,
        })
    }

    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let n = qubits_for_len(counts.len())?;
        let total = counts.iter().sum();
        Ok(Self { n, counts, total })
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    #[inline]
    pub fn record(&mut self, outcome: usize) {
        self.counts[outcome] += 1;
        self.total += 1;
    }

    /// Adds another histogram of the same size.
    pub fn merge(&mut self, other: &BellSampleCounts) -> Result<()> {
        if self.n != other.n {
            return Err(Error::QubitMismatch(self.n, other.n));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }

    /// Sparse `label count` lines, nonzero entries only.
    pub fn to_sparse_text(&self) -> String {
        let mut s = String::new();
        for (i, &c) in self.counts.iter().enumerate().filter(|(_, c)| **c > 0) {
            let label = PauliLabel::from_index(i, self.n).expect("index in range");
            let _ = writeln!(s, "{label} {c}");
        }
        s
    }

    pub fn from_sparse_text(n: usize, text: &str) -> Result<Self> {
        let mut out = Self::new(n)?;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let mut parts = line.split_whitespace();
            let (Some(l), Some(c), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Format(format!("bad counts line {line:?}")));
            };
            let label: PauliLabel = l.parse()?;
            if label.qubits() != n {
                return Err(Error::QubitMismatch(label.qubits(), n));
            }
            let c: u64 = c.parse().map_err(|e| Error::Format(format!("{line:?}: {e}")))?;
            out.counts[label.index()] += c;
            out.total += c;
        }
        Ok(out)
    }
}

/// Raised when a draw would push the running total past the configured cap.
/// The stream keeps every sample drawn up to the cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapReached {
    pub requested: u64,
    pub drawn: u64,
    pub cap: u64,
}

/// Seeded, appendable sampler over one distribution.
#[derive(Debug)]
pub struct BellStream<'a> {
    dist: &'a BellDistribution,
    rng: ChaCha8Rng,
    counts: BellSampleCounts,
    cap: u64,
}

impl<'a> BellStream<'a> {
    pub fn new(dist: &'a BellDistribution, seed: u64, cap: u64) -> Self {
        Self {
            dist,
            rng: ChaCha8Rng::seed_from_u64(seed),
            counts: BellSampleCounts::new(dist.qubits()).expect("valid qubit count"),
            cap,
        }
    }

    pub fn counts(&self) -> &BellSampleCounts {
        &self.counts
    }

    pub fn into_counts(self) -> BellSampleCounts {
        self.counts
    }

    pub fn remaining(&self) -> u64 {
        self.cap.saturating_sub(self.counts.total)
    }

    /// Draws `m` more samples, or as many as the cap allows.
    pub fn draw(&mut self, m: u64) -> std::result::Result<(), CapReached> {
        let allowed = m.min(self.remaining());
        for _ in 0..allowed {
            let a = self.dist.sample(&mut self.rng);
            self.counts.record(a);
        }
        if allowed < m {
            Err(CapReached {
                requested: m,
                drawn: allowed,
                cap: self.cap,
            })
        } else {
            Ok(())
        }
    }
}

/// `m` i.i.d. outcomes, deterministic in `seed`.
pub fn draw_samples(dist: &BellDistribution, m: u64, seed: u64) -> BellSampleCounts {
    let mut stream = BellStream::new(dist, seed, u64::MAX);
    stream.draw(m).expect("uncapped");
    stream.into_counts()
}

/// `ê_P = (1/M) Σ_a counts[a] λ(P, a)` for every label, via one transform.
pub fn estimate_products(counts: &BellSampleCounts) -> Result<Vec<f64>> {
    if counts.total == 0 {
        return Err(Error::EmptyCounts);
    }
    let mut w: Vec<f64> = counts.counts.iter().map(|&c| c as f64).collect();
    symplectic_walsh_in_place(&mut w)?;
    let inv = 1.0 / counts.total as f64;
    let n = counts.n;
    for (i, v) in w.iter_mut().enumerate() {
        *v *= transpose_sign_of(i, n) * inv;
    }
    Ok(w)
}

/// `û_P = sqrt(max(0, ê_P))`.
pub fn magnitudes_from_products(products: &[f64]) -> Vec<f64> {
    products.iter().map(|&e| e.max(0.0).sqrt()).collect()
}
