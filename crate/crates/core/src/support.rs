//! Stage 1: adaptive Bell sampling of `rho ⊗ rho` until the thresholded
//! magnitude estimates recover the true support of large Paulis.

use crate::bell::{bell_distribution_from_vectors, estimate_products, magnitudes_from_products, BellStream};
use crate::density::PauliVector;
use crate::error::{Error, Result};
use crate::pauli::{label_count, qubits_for_len};
use crate::schedule::BlockSchedule;

pub const JACCARD_TARGET: f64 = 0.9;
pub const STAGE1_CAP: u64 = 30_000_000;

/// Accuracy grid `mu = 3 eps / 4` used by the benchmarks.
pub const MU_GRID: [f64; 7] = [0.05, 0.07, 0.11, 0.16, 0.23, 0.34, 0.5];

/// Magnitude estimates `û_P`, with the exact `|tr(P rho)|` when simulated.
#[derive(Clone, Debug, PartialEq)]
pub struct MagnitudeTable {
    n: usize,
    u_hat: Vec<f64>,
    u_true: Option<Vec<f64>>,
}

impl MagnitudeTable {
    pub fn new(u_hat: Vec<f64>, u_true: Option<Vec<f64>>) -> Result<Self> {
        let n = qubits_for_len(u_hat.len())?;
        if let Some(t) = &u_true {
            if t.len() != u_hat.len() {
                return Err(Error::BadLength(t.len()));
            }
        }
        if u_hat.iter().any(|u| !(0.0..=1.0 + 1e-9).contains(u)) {
            return Err(Error::OutOfRange {
                what: "magnitude",
                detail: "entries must lie in [0, 1]".into(),
            });
        }
        Ok(Self { n, u_hat, u_true })
    }

    /// Estimates equal to the truth.
    pub fn exact(rho: &PauliVector) -> Self {
        let u: Vec<f64> = rho.coeffs().iter().map(|r| r.abs().min(1.0)).collect();
        Self {
            n: rho.qubits(),
            u_hat: u.clone(),
            u_true: Some(u),
        }
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn u_hat(&self) -> &[f64] {
        &self.u_hat
    }

    pub fn u_true(&self) -> Option<&[f64]> {
        self.u_true.as_deref()
    }

    pub fn with_truth(mut self, rho: &PauliVector) -> Self {
        self.u_true = Some(rho.coeffs().iter().map(|r| r.abs().min(1.0)).collect());
        self
    }

    /// `label u_hat` text, one line per table index.
    pub fn to_text(&self) -> String {
        let mut s = format!("# n={}\n", self.n);
        for (i, u) in self.u_hat.iter().enumerate() {
            s.push_str(&format!("{i} {u:.17e}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n = None;
        let mut entries = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("n=") {
                    n = Some(v.trim().parse::<usize>().map_err(|e| Error::Format(e.to_string()))?);
                }
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(i), Some(u), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Format(format!("bad magnitude line {line:?}")));
            };
            let i: usize = i.parse().map_err(|_| Error::Format(line.to_string()))?;
            let u: f64 = u.parse().map_err(|_| Error::Format(line.to_string()))?;
            entries.push((i, u));
        }
        let n = n.ok_or_else(|| Error::Format("missing '# n=' header".into()))?;
        let mut u_hat = vec![0.0; label_count(n)];
        for (i, u) in entries {
            *u_hat
                .get_mut(i)
                .ok_or_else(|| Error::Format(format!("label index {i} out of range")))? = u;
        }
        Self::new(u_hat, None)
    }
}

/// Sorted label indices above a magnitude threshold; never contains the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportSet {
    n: usize,
    labels: Vec<usize>,
    threshold: f64,
}

impl SupportSet {
    pub fn new(n: usize, mut labels: Vec<usize>, threshold: f64) -> Self {
        labels.retain(|&l| l != 0);
        labels.sort_unstable();
        labels.dedup();
        Self { n, labels, threshold }
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, label: usize) -> bool {
        self.labels.binary_search(&label).is_ok()
    }
}

fn threshold_values(n: usize, values: &[f64], mu: f64, target: Option<&[bool]>) -> SupportSet {
    let labels = values
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(i, &u)| u >= mu && target.map_or(true, |t| t[*i]))
        .map(|(i, _)| i)
        .collect();
    SupportSet::new(n, labels, mu)
}

/// Labels with `û_P >= mu` (or `u_P >= mu` when `use_truth`), identity excluded.
pub fn threshold_support(table: &MagnitudeTable, mu: f64, use_truth: bool) -> Result<SupportSet> {
    threshold_support_in(table, mu, use_truth, None)
}

/// As [`threshold_support`], restricted to a target subset mask.
pub fn threshold_support_in(
    table: &MagnitudeTable,
    mu: f64,
    use_truth: bool,
    target: Option<&[bool]>,
) -> Result<SupportSet> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::OutOfRange {
            what: "mu",
            detail: format!("{mu} not in (0, 1]"),
        });
    }
    let values = if use_truth {
        table.u_true.as_deref().ok_or_else(|| Error::Format("table has no ground truth".into()))?
    } else {
        &table.u_hat
    };
    Ok(threshold_values(table.n, values, mu, target))
}

/// `|A ∩ B| / |A ∪ B|`, defined as 1 when both are empty.
pub fn jaccard(a: &SupportSet, b: &SupportSet) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::QubitMismatch(a.n, b.n));
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.labels.len() && j < b.labels.len() {
        match a.labels[i].cmp(&b.labels[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.labels.len() + b.labels.len() - inter;
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

#[derive(Clone, Debug)]
pub struct Stage1Config {
    pub mu: f64,
    pub schedule: BlockSchedule,
    pub cap: u64,
    pub seed: u64,
    pub jaccard_target: f64,
    /// Target set `S` as a mask over label indices; `None` means all labels.
    pub target: Option<Vec<bool>>,
}

impl Stage1Config {
    pub fn new(mu: f64, seed: u64) -> Self {
        Self {
            mu,
            schedule: BlockSchedule::Fixed(10_000),
            cap: STAGE1_CAP,
            seed,
            jaccard_target: JACCARD_TARGET,
            target: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Stage1Outcome {
    /// Samples used, `M_1`.
    pub samples: u64,
    pub threshold_met: bool,
    pub table: MagnitudeTable,
    pub estimated: SupportSet,
    pub truth: SupportSet,
    pub jaccard: f64,
    /// `(cumulative samples, jaccard)` at every checkpoint.
    pub trace: Vec<(u64, f64)>,
}

/// Samples `rho ⊗ rho` block by block until `J(Ŝ_mu, S_mu) >= target` or the cap.
pub fn run_stage1(rho: &PauliVector, config: &Stage1Config) -> Result<Stage1Outcome> {
    config.schedule.validate()?;
    let n = rho.qubits();
    let target = config.target.as_deref();
    if let Some(t) = target {
        if t.len() != label_count(n) {
            return Err(Error::BadLength(t.len()));
        }
    }
    let mut table = MagnitudeTable::exact(rho);
    let truth = threshold_support_in(&table, config.mu, true, target)?;
    table.u_hat.iter_mut().for_each(|u| *u = 0.0);
    let mut estimated = SupportSet::new(n, Vec::new(), config.mu);

    let dist = bell_distribution_from_vectors(rho, rho)?;
    let mut stream = BellStream::new(&dist, config.seed, config.cap);
    let mut trace = Vec::new();
    let mut jac = 0.0;
    let mut met = false;
    for checkpoint in config.schedule.checkpoints(config.cap) {
        let need = checkpoint - stream.counts().total();
        // Checkpoints never exceed the cap, so this cannot fail.
        let _ = stream.draw(need);
        let products = estimate_products(stream.counts())?;
        table.u_hat = magnitudes_from_products(&products);
        table.u_hat.iter_mut().for_each(|u| *u = u.min(1.0));
        estimated = threshold_values(n, &table.u_hat, config.mu, target);
        jac = jaccard(&estimated, &truth)?;
        trace.push((checkpoint, jac));
        if jac >= config.jaccard_target {
            met = true;
            break;
        }
    }
    Ok(Stage1Outcome {
        samples: stream.counts().total(),
        threshold_met: met,
        table,
        estimated,
        truth,
        jaccard: jac,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::bell_distribution_from_vectors;
    use crate::states::{make_stabilizer_state, StateFamily};

    fn set(n: usize, labels: &[usize]) -> SupportSet {
        SupportSet::new(n, labels.to_vec(), 0.5)
    }

    #[test]
    fn ghz_truth_support() {
        for n in 2..=5 {
            let rho = make_stabilizer_state(StateFamily::Ghz, n).unwrap().to_pauli_vector();
            let table = MagnitudeTable::exact(&rho);
            for mu in [0.01, 0.5, 0.99] {
                let s = threshold_support(&table, mu, true).unwrap();
                assert_eq!(s.len(), (1 << n) - 1);
            }
        }
    }

    #[test]
    fn thresholding_edges() {
        let zero = MagnitudeTable::new(vec![0.0; 16], None).unwrap();
        assert!(threshold_support(&zero, 0.3, false).unwrap().is_empty());
        let mut u = vec![0.0; 16];
        u[0] = 1.0;
        u[3] = 1.0;
        u[4] = 0.999;
        let t = MagnitudeTable::new(u, None).unwrap();
        assert_eq!(threshold_support(&t, 1.0, false).unwrap().labels(), &[3]);
        assert!(threshold_support(&t, 0.0, false).is_err());
        assert!(threshold_support(&t, 1.01, false).is_err());
        assert!(threshold_support(&t, 0.5, true).is_err());
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&set(2, &[1, 2]), &set(2, &[1, 2])).unwrap(), 1.0);
        assert_eq!(jaccard(&set(2, &[1, 2]), &set(2, &[3, 4])).unwrap(), 0.0);
        assert!((jaccard(&set(2, &[1, 2]), &set(2, &[2, 3])).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(jaccard(&set(2, &[]), &set(2, &[])).unwrap(), 1.0);
        assert!(jaccard(&set(2, &[]), &set(3, &[])).is_err());
    }

    #[test]
    fn exact_distribution_recovers_support() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        for n in 1..=3 {
            let rho = crate::random::random_density(n, &mut rng).to_pauli_vector();
            let dist = bell_distribution_from_vectors(&rho, &rho).unwrap();
            let u = magnitudes_from_products(&dist.expected_products());
            let table = MagnitudeTable::new(u.iter().map(|x| x.min(1.0)).collect(), None)
                .unwrap()
                .with_truth(&rho);
            for (a, b) in table.u_hat().iter().zip(table.u_true().unwrap()) {
                assert!((a - b).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn zero_state_stage1_converges() {
        let rho = make_stabilizer_state(StateFamily::Zero, 3).unwrap().to_pauli_vector();
        for seed in 0..10 {
            let out = run_stage1(&rho, &Stage1Config::new(0.5, seed)).unwrap();
            assert!(out.threshold_met);
            assert!(out.jaccard >= 0.9);
            assert!(out.samples <= STAGE1_CAP);
            assert!(out.trace.windows(2).all(|w| w[0].0 < w[1].0));
        }
    }

    #[test]
    fn zero_cap_returns_immediately() {
        let rho = make_stabilizer_state(StateFamily::Ghz, 2).unwrap().to_pauli_vector();
        let mut cfg = Stage1Config::new(0.5, 1);
        cfg.cap = 0;
        let out = run_stage1(&rho, &cfg).unwrap();
        assert_eq!(out.samples, 0);
        assert!(!out.threshold_met);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn magnitude_text_round_trip() {
        let rho = make_stabilizer_state(StateFamily::Ghz, 2).unwrap().to_pauli_vector();
        let t = MagnitudeTable::exact(&rho);
        let back = MagnitudeTable::from_text(&t.to_text()).unwrap();
        assert_eq!(back.u_hat(), t.u_hat());
        assert!(MagnitudeTable::from_text("0 0.5\n").is_err());
    }
}
