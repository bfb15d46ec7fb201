//! Benchmark input states: GHZ, the all-zero basis state and Gibbs states of
//! random Pauli-sum Hamiltonians, plus the Gibbs map shared with the solver.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::density::DensityOperator;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_deviation, hermitian_eigen, reassemble, spectral_norm_hermitian};
use crate::pauli::{label_count, CMatrix, PauliLabel, MAX_QUBITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateFamily {
    Ghz,
    Zero,
    Gibbs,
}

impl StateFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            StateFamily::Ghz => "GHZ",
            StateFamily::Zero => "Zero",
            StateFamily::Gibbs => "Gibbs",
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            StateFamily::Ghz => 0,
            StateFamily::Zero => 1,
            StateFamily::Gibbs => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(StateFamily::Ghz),
            1 => Some(StateFamily::Zero),
            2 => Some(StateFamily::Gibbs),
            _ => None,
        }
    }
}

impl fmt::Display for StateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StateFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ghz" => Ok(StateFamily::Ghz),
            "zero" => Ok(StateFamily::Zero),
            "gibbs" => Ok(StateFamily::Gibbs),
            _ => Err(Error::Format(format!("unknown state family {s:?}"))),
        }
    }
}

fn check_state_qubits(n: usize) -> Result<()> {
    if (2..=MAX_QUBITS).contains(&n) {
        Ok(())
    } else {
        Err(Error::QubitCount {
            n,
            min: 2,
            max: MAX_QUBITS,
        })
    }
}

/// Rank-one projector onto GHZ or `|0...0>`.
pub fn make_stabilizer_state(family: StateFamily, n: usize) -> Result<DensityOperator> {
    check_state_qubits(n)?;
    let dim = 1usize << n;
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    match family {
        StateFamily::Zero => psi[0] = Complex64::new(1.0, 0.0),
        StateFamily::Ghz => {
            let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            psi[0] = a;
            psi[dim - 1] = a;
        }
        StateFamily::Gibbs => {
            return Err(Error::Format("Gibbs is not a stabilizer family".into()));
        }
    }
    DensityOperator::pure(&psi)
}

/// Largest Pauli-term count used for `n` in the reference grid.
pub fn default_k_max(n: usize) -> Option<u64> {
    match n {
        2..=4 => Some(1 << (2 * n - 1)),
        5..=7 => Some(1 << (n + 3)),
        _ => None,
    }
}

/// `floor(k_max^{j/m})` for `j = 1..=m`, in `j` order and with repeats.
pub fn k_sequence(k_max: u64, m: usize) -> Vec<u64> {
    if m == 0 || k_max == 0 {
        return Vec::new();
    }
    (1..=m)
        .map(|j| {
            let v = if k_max.is_power_of_two() {
                // Exact for every j where the exponent is an integer.
                let e = k_max.trailing_zeros() as u64;
                ((e * j as u64) as f64 / m as f64).exp2()
            } else {
                (k_max as f64).powf(j as f64 / m as f64) * (1.0 + 1e-12)
            };
            (v.floor() as u64).clamp(1, k_max)
        })
        .collect()
}

/// Sorted, deduplicated term counts for `n` (reference grid, `n` in 2..=7).
pub fn k_grid(n: usize, m: usize) -> Result<Vec<u64>> {
    let k_max = default_k_max(n).ok_or(Error::OutOfRange {
        what: "n",
        detail: format!("{n} has no reference k_max; use k_grid_with_max"),
    })?;
    Ok(k_grid_with_max(k_max, m))
}

pub fn k_grid_with_max(k_max: u64, m: usize) -> Vec<u64> {
    let mut ks = k_sequence(k_max, m);
    ks.sort_unstable();
    ks.dedup();
    ks
}

#[derive(Clone, Debug, PartialEq)]
pub struct PauliHamiltonian {
    n: usize,
    terms: Vec<(PauliLabel, f64)>,
}

impl PauliHamiltonian {
    pub fn new(n: usize, terms: Vec<(PauliLabel, f64)>) -> Result<Self> {
        crate::pauli::check_qubits(n)?;
        let mut seen = std::collections::HashSet::new();
        for (label, c) in &terms {
            if label.qubits() != n {
                return Err(Error::QubitMismatch(label.qubits(), n));
            }
            if !c.is_finite() {
                return Err(Error::Format(format!("non-finite coefficient for {label}")));
            }
            if !seen.insert(label.index()) {
                return Err(Error::Format(format!("duplicate term {label}")));
            }
        }
        Ok(Self { n, terms })
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(PauliLabel, f64)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn to_dense(&self) -> CMatrix {
        let dim = 1usize << self.n;
        let mut m = CMatrix::zeros(dim, dim);
        for (label, c) in &self.terms {
            label.add_scaled_to(&mut m, *c);
        }
        m
    }

    /// One `x_bits z_bits coeff` line per term.
    pub fn to_text(&self) -> String {
        let mut s = format!("# n={}\n", self.n);
        for (l, c) in &self.terms {
            s.push_str(&format!("{} {} {}\n", l.x_bits(), l.z_bits(), c));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n = None;
        let mut raw = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("n=") {
                    n = Some(v.trim().parse::<usize>().map_err(|e| Error::Format(e.to_string()))?);
                }
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Format(format!("bad term line {line:?}")));
            }
            let parse_err = |e: &dyn fmt::Display| Error::Format(format!("{line:?}: {e}"));
            let x: u32 = parts[0].parse().map_err(|e| parse_err(&e))?;
            let z: u32 = parts[1].parse().map_err(|e| parse_err(&e))?;
            let c: f64 = parts[2].parse().map_err(|e| parse_err(&e))?;
            raw.push((x, z, c));
        }
        let n = n.ok_or_else(|| Error::Format("missing '# n=' header".into()))?;
        let terms = raw
            .into_iter()
            .map(|(x, z, c)| Ok((PauliLabel::new(x, z, n)?, c)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, terms)
    }
}

/// `k` distinct labels drawn uniformly without replacement, unit coefficients.
pub fn sample_pauli_hamiltonian(
    n: usize,
    k: usize,
    seed: u64,
    exclude_identity: bool,
) -> Result<PauliHamiltonian> {
    crate::pauli::check_qubits(n)?;
    let offset = usize::from(exclude_identity);
    let pool = label_count(n) - offset;
    if k == 0 || k > pool {
        return Err(Error::OutOfRange {
            what: "k",
            detail: format!("{k} not in 1..={pool}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, pool, k)
        .into_iter()
        .map(|i| i + offset)
        .collect();
    picks.sort_unstable();
    let terms = picks
        .into_iter()
        .map(|i| (PauliLabel::from_index(i, n).expect("index in range"), 1.0))
        .collect();
    PauliHamiltonian::new(n, terms)
}

/// `exp(-beta H) / tr exp(-beta H)` via eigendecomposition.
///
/// The largest exponent is subtracted before exponentiation.
pub fn gibbs_state(h: &CMatrix, beta: f64) -> Result<DensityOperator> {
    let dim = h.nrows();
    if dim != h.ncols() {
        return Err(Error::InvalidState("Hamiltonian is not square".into()));
    }
    let scale = h.iter().fold(1.0f64, |a, v| a.max(v.norm()));
    let dev = hermitian_deviation(h);
    if dev > 1e-10 * scale {
        return Err(Error::NotHermitian(dev));
    }
    if !beta.is_finite() {
        return Err(Error::OutOfRange {
            what: "beta",
            detail: beta.to_string(),
        });
    }
    let (vals, vecs) = hermitian_eigen(h)?;
    let weights = boltzmann_weights(&vals, beta);
    DensityOperator::from_matrix_unchecked(reassemble(&vecs, &weights))
}

pub(crate) fn boltzmann_weights(vals: &DVector<f64>, beta: f64) -> DVector<f64> {
    let top = vals
        .iter()
        .map(|&e| -beta * e)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w = vals.map(|e| (-beta * e - top).exp());
    let z: f64 = w.sum();
    w /= z;
    w
}

pub fn gibbs_of_hamiltonian(h: &PauliHamiltonian, beta: f64) -> Result<DensityOperator> {
    gibbs_state(&h.to_dense(), beta)
}

/// Test-state recipe: rescale `H` by its spectral norm, then `beta = 1`.
///
/// Returns the state and whether `H` was degenerate (zero norm), in which
/// case the state is maximally mixed.
pub fn normalized_gibbs_state(h: &PauliHamiltonian) -> Result<(DensityOperator, bool)> {
    let dense = h.to_dense();
    let norm = spectral_norm_hermitian(&dense)?;
    if norm < 1e-12 {
        return Ok((DensityOperator::maximally_mixed(h.qubits())?, true));
    }
    Ok((gibbs_state(&(dense / Complex64::from(norm)), 1.0)?, false))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestStateSpec {
    pub family: StateFamily,
    pub qubits: usize,
    /// Term count, Gibbs only.
    pub k: usize,
    pub seed: u64,
    pub exclude_identity: bool,
}

#[derive(Clone, Debug)]
pub struct TestState {
    pub spec: TestStateSpec,
    pub hamiltonian: Option<PauliHamiltonian>,
    pub rho: DensityOperator,
    pub degenerate: bool,
}

impl TestStateSpec {
    pub fn stabilizer(family: StateFamily, n: usize) -> Self {
        Self {
            family,
            qubits: n,
            k: 0,
            seed: 0,
            exclude_identity: false,
        }
    }

    pub fn gibbs(n: usize, k: usize, seed: u64) -> Self {
        Self {
            family: StateFamily::Gibbs,
            qubits: n,
            k,
            seed,
            exclude_identity: false,
        }
    }

    pub fn build(&self) -> Result<TestState> {
        match self.family {
            StateFamily::Ghz | StateFamily::Zero => Ok(TestState {
                spec: self.clone(),
                hamiltonian: None,
                rho: make_stabilizer_state(self.family, self.qubits)?,
                degenerate: false,
            }),
            StateFamily::Gibbs => {
                check_state_qubits(self.qubits)?;
                let h = sample_pauli_hamiltonian(
                    self.qubits,
                    self.k,
                    self.seed,
                    self.exclude_identity,
                )?;
                let (rho, degenerate) = normalized_gibbs_state(&h)?;
                Ok(TestState {
                    spec: self.clone(),
                    hamiltonian: Some(h),
                    rho,
                    degenerate,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliLabel;

    fn support(rho: &DensityOperator) -> Vec<(String, f64)> {
        let v = rho.to_pauli_vector();
        let mut out: Vec<_> = PauliLabel::all(rho.qubits())
            .unwrap()
            .filter(|l| v.get(l).abs() > 1e-10)
            .map(|l| (l.to_string(), v.get(&l)))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    #[test]
    fn zero_state_support() {
        let rho = make_stabilizer_state(StateFamily::Zero, 2).unwrap();
        let s = support(&rho);
        let names: Vec<_> = s.iter().map(|x| x.0.as_str()).collect();
        assert_eq!(names, ["II", "IZ", "ZI", "ZZ"]);
        assert!(s.iter().all(|x| (x.1 - 1.0).abs() < 1e-12));
    }

    #[test]
    fn ghz_support() {
        let rho = make_stabilizer_state(StateFamily::Ghz, 2).unwrap();
        let s = support(&rho);
        let expect = [("II", 1.0), ("XX", 1.0), ("YY", -1.0), ("ZZ", 1.0)];
        assert_eq!(s.len(), 4);
        for ((name, v), (en, ev)) in s.iter().zip(expect) {
            assert_eq!(name, en);
            assert!((v - ev).abs() < 1e-12);
        }
        for n in 2..=6 {
            for fam in [StateFamily::Ghz, StateFamily::Zero] {
                let rho = make_stabilizer_state(fam, n).unwrap();
                let v = rho.to_pauli_vector();
                let ones = v.coeffs().iter().filter(|c| (c.abs() - 1.0).abs() < 1e-10).count();
                let zeros = v.coeffs().iter().filter(|c| c.abs() < 1e-10).count();
                assert_eq!(ones, 1 << n);
                assert_eq!(ones + zeros, 1 << (2 * n));
            }
        }
    }

    #[test]
    fn stabilizer_rejects_bad_n() {
        assert!(make_stabilizer_state(StateFamily::Ghz, 1).is_err());
        assert!(make_stabilizer_state(StateFamily::Zero, 13).is_err());
    }

    #[test]
    fn k_grid_reference_values() {
        assert_eq!(default_k_max(2), Some(8));
        assert_eq!(default_k_max(4), Some(128));
        assert_eq!(default_k_max(5), Some(256));
        assert_eq!(default_k_max(7), Some(1024));
        let g = k_grid(2, 100).unwrap();
        assert_eq!(*g.last().unwrap(), 8);
        assert_eq!(g[0], 1);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let g5 = k_grid(5, 100).unwrap();
        assert_eq!(*g5.last().unwrap(), 256);
        // 256^{25/100} = 4 exactly; must not round down to 3.
        assert_eq!(k_sequence(256, 100)[24], 4);
        assert!(k_grid(8, 100).is_err());
        assert_eq!(k_grid_with_max(1000, 3), vec![10, 100, 1000]);
    }

    #[test]
    fn hamiltonian_sampling() {
        let all = sample_pauli_hamiltonian(2, 16, 3, false).unwrap();
        let idx: Vec<usize> = all.terms().iter().map(|t| t.0.index()).collect();
        assert_eq!(idx, (0..16).collect::<Vec<_>>());
        let a = sample_pauli_hamiltonian(3, 10, 42, false).unwrap();
        let b = sample_pauli_hamiltonian(3, 10, 42, false).unwrap();
        let c = sample_pauli_hamiltonian(3, 10, 43, false).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(sample_pauli_hamiltonian(2, 17, 0, false).is_err());
        assert!(sample_pauli_hamiltonian(2, 0, 0, false).is_err());
        let no_id = sample_pauli_hamiltonian(2, 15, 0, true).unwrap();
        assert!(no_id.terms().iter().all(|t| !t.0.is_identity()));
    }

    #[test]
    fn hamiltonian_label_frequencies_uniform() {
        // 10^4 draws of k=10 labels out of 64: each label appears ~1562.5 times.
        let (n, k, draws) = (3usize, 10usize, 10_000u64);
        let mut counts = vec![0u64; 64];
        for seed in 0..draws {
            for (l, _) in sample_pauli_hamiltonian(n, k, seed, false).unwrap().terms() {
                counts[l.index()] += 1;
            }
        }
        let p = k as f64 / 64.0;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in &counts {
            assert!((*c as f64 - mean).abs() < 5.0 * sd, "count {c}");
        }
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - mean).powi(2) / mean).sum();
        // 63 dof; 99.9th percentile is about 103.4 (without the (1-p) correction
        // the statistic is conservative).
        assert!(chi2 < 103.4, "chi2 {chi2}");
    }

    #[test]
    fn hamiltonian_text_round_trip() {
        let h = sample_pauli_hamiltonian(3, 5, 9, false).unwrap();
        assert_eq!(PauliHamiltonian::from_text(&h.to_text()).unwrap(), h);
        assert!(PauliHamiltonian::from_text("0 1 1.0\n").is_err());
    }

    #[test]
    fn gibbs_of_zero_is_mixed() {
        let rho = gibbs_state(&CMatrix::zeros(4, 4), 1.0).unwrap();
        let mixed = DensityOperator::maximally_mixed(2).unwrap();
        assert!((rho.matrix() - mixed.matrix()).norm() < 1e-14);
    }

    #[test]
    fn gibbs_single_z_closed_form() {
        let z: PauliLabel = "Z".parse().unwrap();
        let rho = gibbs_state(&z.to_dense(), 1.0).unwrap();
        let e = rho.expectation(&z).unwrap();
        assert!((e + 1f64.tanh()).abs() < 1e-12);
        assert!((e + 0.76159).abs() < 1e-5);
    }

    #[test]
    fn gibbs_properties_random_hamiltonian() {
        let h = sample_pauli_hamiltonian(3, 12, 5, false).unwrap();
        let (rho, degenerate) = normalized_gibbs_state(&h).unwrap();
        assert!(!degenerate);
        rho.validate().unwrap();
        let hd = h.to_dense();
        let comm = &hd * rho.matrix() - rho.matrix() * &hd;
        assert!(comm.iter().all(|v| v.norm() < 1e-9));
        let (vals, _) = hermitian_eigen(rho.matrix()).unwrap();
        assert!(vals.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn gibbs_handles_large_beta_without_overflow() {
        let z: PauliLabel = "ZZ".parse().unwrap();
        let rho = gibbs_state(&z.to_dense(), 800.0).unwrap();
        rho.validate().unwrap();
        assert!((rho.expectation(&z).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_term_gibbs_has_two_coefficients() {
        for n in 2..=4 {
            for seed in 0..4 {
                let h = sample_pauli_hamiltonian(n, 1, seed, true).unwrap();
                let (rho, _) = normalized_gibbs_state(&h).unwrap();
                let v = rho.to_pauli_vector();
                let nz: Vec<usize> = (0..v.len()).filter(|&i| v.coeffs()[i].abs() > 1e-12).collect();
                assert_eq!(nz, vec![0, h.terms()[0].0.index()]);
            }
        }
    }

    #[test]
    fn identity_terms_do_not_change_state() {
        for n in 2..=3 {
            let base = sample_pauli_hamiltonian(n, 6, 17, true).unwrap();
            let mut terms = base.terms().to_vec();
            terms.push((PauliLabel::identity(n).unwrap(), 1.0));
            let shifted = PauliHamiltonian::new(n, terms).unwrap();
            let a = gibbs_of_hamiltonian(&base, 0.7).unwrap();
            let b = gibbs_of_hamiltonian(&shifted, 0.7).unwrap();
            assert!((a.matrix() - b.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_identity_only_hamiltonian() {
        let h = PauliHamiltonian::new(2, vec![(PauliLabel::identity(2).unwrap(), 1.0)]).unwrap();
        let (rho, degenerate) = normalized_gibbs_state(&h).unwrap();
        // ||I|| = 1, so this is not degenerate, and exp(-I) normalizes to mixed.
        assert!(!degenerate);
        let mixed = DensityOperator::maximally_mixed(2).unwrap();
        assert!((rho.matrix() - mixed.matrix()).norm() < 1e-12);
        let empty = PauliHamiltonian::new(2, vec![]).unwrap();
        let (rho, degenerate) = normalized_gibbs_state(&empty).unwrap();
        assert!(degenerate);
        assert!((rho.matrix() - mixed.matrix()).norm() < 1e-12);
    }

    #[test]
    fn non_hermitian_hamiltonian_rejected() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(gibbs_state(&m, 1.0), Err(Error::NotHermitian(_))));
    }
}
