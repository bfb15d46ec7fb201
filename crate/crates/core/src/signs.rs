//! Stage 3: Bell sampling of `rho ⊗ sigma` to fix the signs of the
//! significant Paulis, and the reconstruction metrics.

use crate::bell::{bell_distribution_from_vectors, estimate_products, BellStream};
use crate::density::PauliVector;
use crate::error::{Error, Result};
use crate::pauli::label_count;
use crate::schedule::BlockSchedule;
use crate::sign_of;
use crate::support::{MagnitudeTable, SupportSet};

pub const STAGE3_CAP: u64 = 700_000;
pub const AGREEMENT_TARGET: f64 = 0.9;

/// Thresholded Pauli expansion `r̂_P û_P` on the estimated support.
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    values: Vec<f64>,
    support: Vec<usize>,
    signs: Vec<f64>,
}

impl Reconstruction {
    /// All signs `+1`.
    pub fn new(table: &MagnitudeTable, support: &SupportSet) -> Result<Self> {
        let signs = vec![1.0; support.len()];
        Self::with_signs(table, support, signs)
    }

    pub fn with_signs(table: &MagnitudeTable, support: &SupportSet, signs: Vec<f64>) -> Result<Self> {
        let n = table.qubits();
        if support.qubits() != n {
            return Err(Error::QubitMismatch(support.qubits(), n));
        }
        if signs.len() != support.len() {
            return Err(Error::BadLength(signs.len()));
        }
        let mut values = vec![0.0; label_count(n)];
        values[0] = 1.0;
        for (&label, &s) in support.labels().iter().zip(&signs) {
            values[label] = s * table.u_hat()[label].min(1.0);
        }
        Ok(Self {
            values,
            support: support.labels().to_vec(),
            signs,
        })
    }

    /// Every coefficient zero, identity included.
    pub fn zero(n: usize) -> Result<Self> {
        crate::pauli::check_qubits(n)?;
        Ok(Self {
            values: vec![0.0; label_count(n)],
            support: Vec::new(),
            signs: Vec::new(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    /// `r̂_P`, or `+1` for labels outside the support.
    pub fn sign(&self, label: usize) -> f64 {
        match self.support.binary_search(&label) {
            Ok(i) => self.signs[i],
            Err(_) => 1.0,
        }
    }

    pub fn flip(&mut self, label: usize) {
        if let Ok(i) = self.support.binary_search(&label) {
            self.signs[i] = -self.signs[i];
            self.values[label] = -self.values[label];
        }
    }
}

/// `2^{-n} Σ_P (recon_P - tr(P rho))^2` over all labels.
pub fn mse(rho: &PauliVector, recon: &Reconstruction) -> Result<f64> {
    if rho.len() != recon.values.len() {
        return Err(Error::BadLength(recon.values.len()));
    }
    let sum: f64 = rho
        .coeffs()
        .iter()
        .zip(&recon.values)
        .map(|(a, b)| (b - a) * (b - a))
        .sum();
    Ok(sum / (1u64 << rho.qubits()) as f64)
}

/// Fraction of labels with `|tr(P rho)| >= mu` whose sign is recovered.
/// Identity excluded; 1 when no label qualifies.
pub fn sign_agreement(recon: &Reconstruction, rho: &PauliVector, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::OutOfRange {
            what: "mu",
            detail: mu.to_string(),
        });
    }
    if rho.len() != recon.values.len() {
        return Err(Error::BadLength(recon.values.len()));
    }
    let (mut hit, mut total) = (0usize, 0usize);
    for (label, &t) in rho.coeffs().iter().enumerate().skip(1) {
        if t.abs() >= mu {
            total += 1;
            if recon.sign(label) == sign_of(t) {
                hit += 1;
            }
        }
    }
    Ok(if total == 0 { 1.0 } else { hit as f64 / total as f64 })
}

#[derive(Clone, Debug)]
pub struct Stage3Config {
    pub schedule: BlockSchedule,
    pub cap: u64,
    pub seed: u64,
    pub agreement_target: f64,
    /// Threshold on `|tr(P rho)|` for the agreement denominator.
    pub agreement_mu: f64,
}

impl Stage3Config {
    pub fn new(agreement_mu: f64, seed: u64) -> Self {
        Self {
            schedule: BlockSchedule::Geometric { first: 1, factor: 2.0 },
            cap: STAGE3_CAP,
            seed,
            agreement_target: AGREEMENT_TARGET,
            agreement_mu,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage3Point {
    pub samples: u64,
    pub mse: f64,
    pub agreement: f64,
}

#[derive(Clone, Debug)]
pub struct Stage3Outcome {
    pub reconstruction: Reconstruction,
    /// Samples used, `M_3`.
    pub samples: u64,
    pub target_met: bool,
    pub mse: f64,
    pub agreement: f64,
    pub trace: Vec<Stage3Point>,
}

/// `r̂_P = sgn(ê_P) sgn(tr(P sigma))` for each label of the support.
pub fn recover_signs(products: &[f64], sigma: &PauliVector, support: &SupportSet) -> Vec<f64> {
    support
        .labels()
        .iter()
        .map(|&l| sign_of(products[l]) * sign_of(sigma.coeffs()[l]))
        .collect()
}

/// Samples `rho ⊗ sigma` block by block until the sign agreement reaches
/// the target or the cap.
pub fn run_stage3(
    rho: &PauliVector,
    sigma: &PauliVector,
    table: &MagnitudeTable,
    support: &SupportSet,
    config: &Stage3Config,
) -> Result<Stage3Outcome> {
    config.schedule.validate()?;
    let n = rho.qubits();
    for q in [sigma.qubits(), table.qubits(), support.qubits()] {
        if q != n {
            return Err(Error::QubitMismatch(q, n));
        }
    }
    let dist = bell_distribution_from_vectors(rho, sigma)?;
    let mut stream = BellStream::new(&dist, config.seed, config.cap);
    let mut recon = Reconstruction::new(table, support)?;
    let mut trace = Vec::new();
    let mut met = false;
    for checkpoint in config.schedule.checkpoints(config.cap) {
        let need = checkpoint - stream.counts().total();
        let _ = stream.draw(need);
        let products = estimate_products(stream.counts())?;
        recon = Reconstruction::with_signs(table, support, recover_signs(&products, sigma, support))?;
        let point = Stage3Point {
            samples: checkpoint,
            mse: mse(rho, &recon)?,
            agreement: sign_agreement(&recon, rho, config.agreement_mu)?,
        };
        let done = point.agreement >= config.agreement_target;
        trace.push(point);
        if done {
            met = true;
            break;
        }
    }
    let (mse_final, agreement) = match trace.last() {
        Some(p) => (p.mse, p.agreement),
        None => (mse(rho, &recon)?, sign_agreement(&recon, rho, config.agreement_mu)?),
    };
    Ok(Stage3Outcome {
        reconstruction: recon,
        samples: stream.counts().total(),
        target_met: met,
        mse: mse_final,
        agreement,
        trace,
    })
}
