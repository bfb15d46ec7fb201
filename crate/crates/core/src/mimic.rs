//! Stage 2: search for a mimicking state `sigma` with
//! `|tr(P sigma)| >= eps/4` on every `P` whose magnitude estimate is at
//! least `3 eps / 4`.
//!
//! The search is matrix multiplicative weights over Gibbs states
//! `sigma = exp(-beta H) / Z`. Each iteration picks a label where `sigma`
//! is far from both `+u_P` and `-u_P`, fixes its sign from `rho`, and moves
//! `H` along that Pauli. Two update rules are provided:
//!
//! * [`Variant::V1`] adds `sgn(tr(P sigma) - r_P u_P) P` with unit step.
//! * [`Variant::V2`] adds `eta (tr(P sigma) - r_P u_P) P` and backtracks on
//!   `eta` until the residual on `P` shrinks; accepted steps grow `eta` by
//!   1.3, and a step size below `1e-20` stops the search.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::density::{DensityOperator, PauliVector};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, reassemble};
use crate::pauli::{CMatrix, PauliLabel};
use crate::sign_of;
use crate::states::{boltzmann_weights, PauliHamiltonian};
use crate::support::MagnitudeTable;

pub const ETA_GROWTH: f64 = 1.3;
pub const ETA_FLOOR: f64 = 1e-20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    V1,
    V2,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::V1 => "v1",
            Variant::V2 => "v2",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "v1" => Ok(Variant::V1),
            "v2" => Ok(Variant::V2),
            _ => Err(Error::Format(format!("unknown variant {s:?}"))),
        }
    }
}

/// How `r_P = sgn(tr(P rho))` is obtained during the search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignSource {
    /// Exact sign from the simulated state.
    Oracle,
    /// Majority vote over `shots` simulated single-copy Pauli measurements.
    Sampled { shots: u64 },
}

impl fmt::Display for SignSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignSource::Oracle => f.write_str("oracle"),
            SignSource::Sampled { shots } => write!(f, "sampled:{shots}"),
        }
    }
}

impl FromStr for SignSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "oracle" {
            return Ok(SignSource::Oracle);
        }
        match s.strip_prefix("sampled:").map(str::parse::<u64>) {
            Some(Ok(shots)) if shots > 0 => Ok(SignSource::Sampled { shots }),
            _ => Err(Error::Format(format!("bad sign source {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub variant: Variant,
    /// Initial step size; defaults to `(3/8) 2^n` for v2 and 1 for v1.
    pub eta0: Option<f64>,
    /// Iteration cap `T`; defaults to `ceil(64 n / eps^2) + 1`.
    pub max_iterations: Option<usize>,
    /// Inverse temperature; defaults to `sqrt(n / T)`.
    pub beta: Option<f64>,
    pub sign_source: SignSource,
    pub sign_seed: u64,
}

impl SolverConfig {
    pub fn new(epsilon: f64, variant: Variant) -> Self {
        Self {
            epsilon,
            variant,
            eta0: None,
            max_iterations: None,
            beta: None,
            sign_source: SignSource::Oracle,
            sign_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::OutOfRange {
                what: "epsilon",
                detail: format!("{} not in (0, 1)", self.epsilon),
            });
        }
        if let Some(eta) = self.eta0 {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(Error::OutOfRange {
                    what: "eta0",
                    detail: eta.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn iteration_cap(&self, n: usize) -> usize {
        self.max_iterations
            .unwrap_or_else(|| default_iteration_cap(n, self.epsilon))
    }

    pub fn beta(&self, n: usize) -> f64 {
        self.beta
            .unwrap_or_else(|| (n as f64 / default_iteration_cap(n, self.epsilon) as f64).sqrt())
    }

    pub fn eta0(&self, n: usize) -> f64 {
        self.eta0.unwrap_or(match self.variant {
            Variant::V1 => 1.0,
            Variant::V2 => 0.375 * (1u64 << n) as f64,
        })
    }
}

/// `T = ceil(64 n / eps^2) + 1`.
pub fn default_iteration_cap(n: usize, epsilon: f64) -> usize {
    (64.0 * n as f64 / (epsilon * epsilon)).ceil() as usize + 1
}

/// A label that is far from both `+u_P` and `-u_P`, with the largest margin
/// `min(|t - u|, |t + u|)`; ties go to the lower index.
pub fn find_violation(sigma: &[f64], u_hat: &[f64], epsilon: f64) -> Option<(usize, f64)> {
    let floor = 0.75 * epsilon;
    let half = 0.5 * epsilon;
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, (&t, &u)) in sigma.iter().zip(u_hat).enumerate().skip(1) {
        if u < floor {
            continue;
        }
        let (lo, hi) = ((t - u).abs(), (t + u).abs());
        if lo > half && hi > half {
            let margin = lo.min(hi);
            if best.map_or(true, |(_, _, m)| margin > m) {
                best = Some((i, u, margin));
            }
        }
    }
    best.map(|(i, u, _)| (i, u))
}

/// `r_P` from the oracle or from simulated single-copy shots.
pub fn estimate_sign(
    rho_expectation: f64,
    source: SignSource,
    rng: &mut ChaCha8Rng,
) -> f64 {
    match source {
        SignSource::Oracle => sign_of(rho_expectation),
        SignSource::Sampled { shots } => {
            let p_plus = (0.5 * (1.0 + rho_expectation)).clamp(0.0, 1.0);
            let plus = Binomial::new(shots, p_plus)
                .expect("probability in [0, 1]")
                .sample(rng);
            // Majority of +1 outcomes; a tie counts as +1.
            sign_of(2.0 * plus as f64 - shots as f64)
        }
    }
}

/// Gibbs map that keeps `H` dense and counts evaluations.
#[derive(Clone, Debug)]
pub struct GibbsMap {
    beta: f64,
    evaluations: u64,
}

impl GibbsMap {
    pub fn new(beta: f64) -> Self {
        Self { beta, evaluations: 0 }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn evaluate(&mut self, h: &CMatrix) -> Result<DensityOperator> {
        self.evaluations += 1;
        let (vals, vecs) = hermitian_eigen(h)?;
        let w = boltzmann_weights(&vals, self.beta);
        DensityOperator::from_matrix_unchecked(reassemble(&vecs, &w))
    }
}

/// Solver state: dense `H`, the current `sigma` and its Pauli vector.
#[derive(Clone, Debug)]
pub struct MimicState {
    pub h: CMatrix,
    pub sigma: DensityOperator,
    pub sigma_pv: PauliVector,
    pub terms: BTreeMap<usize, f64>,
}

impl MimicState {
    /// `H = 0`, `sigma = I / 2^n`.
    pub fn initial(n: usize) -> Result<Self> {
        let dim = 1usize << n;
        Ok(Self {
            h: CMatrix::zeros(dim, dim),
            sigma: DensityOperator::maximally_mixed(n)?,
            sigma_pv: PauliVector::maximally_mixed(n)?,
            terms: BTreeMap::new(),
        })
    }

    pub fn qubits(&self) -> usize {
        self.sigma.qubits()
    }

    fn apply(&mut self, label: usize, coeff: f64, h: CMatrix, sigma: DensityOperator) {
        *self.terms.entry(label).or_insert(0.0) += coeff;
        self.h = h;
        self.sigma_pv = sigma.to_pauli_vector();
        self.sigma = sigma;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub eta: f64,
    /// Gibbs evaluations spent in this update.
    pub substeps: u64,
    /// Step size fell below the floor without an accepted move.
    pub stalled: bool,
    pub delta: f64,
}

/// Original update: `H += sgn(tr(P sigma) - r_P u_P) P`, then one Gibbs evaluation.
///
/// A zero residual leaves `H` unchanged (and still costs the evaluation).
pub fn update_v1(
    state: &mut MimicState,
    gibbs: &mut GibbsMap,
    label: usize,
    sign: f64,
    u: f64,
) -> Result<StepReport> {
    let n = state.qubits();
    let p = PauliLabel::from_index(label, n)?;
    let delta = state.sigma_pv.coeffs()[label] - sign * u;
    let coeff = if delta > 0.0 {
        1.0
    } else if delta < 0.0 {
        -1.0
    } else {
        0.0
    };
    let mut h = state.h.clone();
    p.add_scaled_to(&mut h, coeff);
    let sigma = gibbs.evaluate(&h)?;
    state.apply(label, coeff, h, sigma);
    Ok(StepReport {
        eta: 1.0,
        substeps: 1,
        stalled: false,
        delta,
    })
}

/// Adaptive update with backtracking on `eta`.
pub fn update_v2(
    state: &mut MimicState,
    gibbs: &mut GibbsMap,
    label: usize,
    sign: f64,
    u: f64,
    eta: f64,
) -> Result<StepReport> {
    let n = state.qubits();
    let p = PauliLabel::from_index(label, n)?;
    let target = sign * u;
    let delta = state.sigma_pv.coeffs()[label] - target;
    let mut eta = eta;
    let mut substeps = 0;
    if eta < ETA_FLOOR {
        return Ok(StepReport {
            eta,
            substeps,
            stalled: true,
            delta,
        });
    }
    loop {
        let mut h = state.h.clone();
        p.add_scaled_to(&mut h, eta * delta);
        let sigma = gibbs.evaluate(&h)?;
        substeps += 1;
        let residual = (sigma.expectation(&p)? - target).abs();
        if residual < delta.abs() {
            state.apply(label, eta * delta, h, sigma);
            return Ok(StepReport {
                eta: eta * ETA_GROWTH,
                substeps,
                stalled: false,
                delta,
            });
        }
        eta /= 2.0;
        if eta < ETA_FLOOR {
            return Ok(StepReport {
                eta,
                substeps,
                stalled: true,
                delta,
            });
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub label: usize,
    pub delta: f64,
    pub eta: f64,
    pub substeps: u64,
}

#[derive(Clone, Debug)]
pub struct MimicResult {
    pub feasible: bool,
    pub sigma: DensityOperator,
    pub sigma_pv: PauliVector,
    pub hamiltonian: PauliHamiltonian,
    /// Accepted update steps `t`.
    pub iterations: usize,
    /// Total Gibbs evaluations, including backtracking substeps.
    pub gibbs_evaluations: u64,
    pub eta_final: f64,
    pub stalled: bool,
    pub iteration_cap: usize,
    pub beta: f64,
    pub trace: Vec<TraceStep>,
}

impl MimicResult {
    /// Step-size adaptations beyond one evaluation per accepted update.
    pub fn substeps(&self) -> u64 {
        self.gibbs_evaluations.saturating_sub(self.iterations as u64)
    }
}

/// `|tr(P sigma)| >= eps/4` for every `P` with `û_P >= 3 eps / 4`.
pub fn certificate_holds(sigma: &[f64], u_hat: &[f64], epsilon: f64) -> bool {
    sigma
        .iter()
        .zip(u_hat)
        .skip(1)
        .filter(|(_, &u)| u >= 0.75 * epsilon)
        .all(|(&t, _)| t.abs() >= 0.25 * epsilon)
}

/// Runs the full search from `H = 0`. `rho` supplies the signs.
pub fn solve_mimicking(
    table: &MagnitudeTable,
    config: &SolverConfig,
    rho: &PauliVector,
) -> Result<MimicResult> {
    config.validate()?;
    let n = table.qubits();
    if rho.qubits() != n {
        return Err(Error::QubitMismatch(rho.qubits(), n));
    }
    let cap = config.iteration_cap(n);
    let beta = config.beta(n);
    let mut gibbs = GibbsMap::new(beta);
    let mut state = MimicState::initial(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.sign_seed);
    let mut eta = config.eta0(n);
    let mut trace = Vec::new();
    let mut feasible = false;
    let mut stalled = false;
    let mut iterations = 0;

    for _ in 0..cap {
        let Some((label, u)) = find_violation(state.sigma_pv.coeffs(), table.u_hat(), config.epsilon)
        else {
            feasible = true;
            break;
        };
        let sign = estimate_sign(rho.coeffs()[label], config.sign_source, &mut rng);
        let report = match config.variant {
            Variant::V1 => update_v1(&mut state, &mut gibbs, label, sign, u)?,
            Variant::V2 => update_v2(&mut state, &mut gibbs, label, sign, u, eta)?,
        };
        eta = report.eta;
        trace.push(TraceStep {
            label,
            delta: report.delta,
            eta: report.eta,
            substeps: report.substeps,
        });
        if report.stalled {
            stalled = true;
            break;
        }
        iterations += 1;
    }

    if feasible {
        feasible = certificate_holds(state.sigma_pv.coeffs(), table.u_hat(), config.epsilon);
    }
    let terms = state
        .terms
        .iter()
        .filter(|(_, c)| **c != 0.0)
        .map(|(&i, &c)| (PauliLabel::from_index(i, n).expect("index in range"), c))
        .collect();
    Ok(MimicResult {
        feasible,
        sigma: state.sigma,
        sigma_pv: state.sigma_pv,
        hamiltonian: PauliHamiltonian::new(n, terms)?,
        iterations,
        gibbs_evaluations: gibbs.evaluations(),
        eta_final: eta,
        stalled,
        iteration_cap: cap,
        beta,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{make_stabilizer_state, StateFamily};

    fn z_index() -> usize {
        "Z".parse::<PauliLabel>().unwrap().index()
    }

    #[test]
    fn defaults() {
        let c = SolverConfig::new(0.5, Variant::V1);
        assert_eq!(c.iteration_cap(1), 257);
        assert!((c.beta(1) - (1.0f64 / 257.0).sqrt()).abs() < 1e-15);
        assert_eq!(c.eta0(1), 1.0);
        assert_eq!(SolverConfig::new(0.5, Variant::V2).eta0(5), 12.0);
        assert!(SolverConfig::new(1.0, Variant::V1).validate().is_err());
        assert!(SolverConfig::new(0.0, Variant::V1).validate().is_err());
    }

    #[test]
    fn violation_rules() {
        // sigma maximally mixed: any u >= 3eps/4 violates.
        let sigma = [1.0, 0.0, 0.0, 0.0];
        let u = [1.0, 0.0, 0.0, 0.4];
        assert_eq!(find_violation(&sigma, &u, 0.5), Some((3, 0.4)));
        // exact match on +u: not violating.
        let sigma = [1.0, 0.0, 0.0, 0.4];
        assert_eq!(find_violation(&sigma, &u, 0.5), None);
        // nothing above the floor.
        assert_eq!(find_violation(&[1.0, 0.0, 0.0, 0.0], &[1.0, 0.1, 0.2, 0.3], 0.5), None);
        // largest margin wins; equal margins go to the lower index.
        let u = [1.0, 0.6, 0.9, 0.9];
        assert_eq!(find_violation(&[1.0, 0.0, 0.0, 0.0], &u, 0.5), Some((2, 0.9)));
    }

    #[test]
    fn sign_estimates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(estimate_sign(1.0, SignSource::Oracle, &mut rng), 1.0);
        assert_eq!(estimate_sign(0.0, SignSource::Oracle, &mut rng), 1.0);
        assert_eq!(estimate_sign(-0.2, SignSource::Oracle, &mut rng), -1.0);
        // P(majority wrong) at mean 0.8 over 1000 shots is far below 1e-9.
        for _ in 0..200 {
            assert_eq!(estimate_sign(0.8, SignSource::Sampled { shots: 1000 }, &mut rng), 1.0);
        }
        assert_eq!("sampled:30".parse::<SignSource>().unwrap(), SignSource::Sampled { shots: 30 });
        assert!("sampled:0".parse::<SignSource>().is_err());
    }

    #[test]
    fn v1_scalar_step() {
        let beta = (1.0f64 / 257.0).sqrt();
        let mut state = MimicState::initial(1).unwrap();
        let mut gibbs = GibbsMap::new(beta);
        let r = update_v1(&mut state, &mut gibbs, z_index(), 1.0, 0.9).unwrap();
        assert_eq!(r.eta, 1.0);
        assert_eq!(state.terms[&z_index()], -1.0);
        let tz = state.sigma_pv.coeffs()[z_index()];
        assert!((tz - beta.tanh()).abs() < 1e-12);
        assert!((tz - 0.0623).abs() < 1e-4);
        // Same sign again: H accumulates -2 Z.
        update_v1(&mut state, &mut gibbs, z_index(), 1.0, 0.9).unwrap();
        assert_eq!(state.terms[&z_index()], -2.0);
        assert!((state.sigma_pv.coeffs()[z_index()] - (2.0 * beta).tanh()).abs() < 1e-12);
    }

    #[test]
    fn v1_zero_residual_is_noop() {
        let mut state = MimicState::initial(1).unwrap();
        let mut gibbs = GibbsMap::new(0.1);
        update_v1(&mut state, &mut gibbs, z_index(), 1.0, 0.0).unwrap();
        assert!(state.h.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn v2_scalar_step_accepts_first_try() {
        let beta = (1.0f64 / 257.0).sqrt();
        let mut state = MimicState::initial(1).unwrap();
        let mut gibbs = GibbsMap::new(beta);
        let r = update_v2(&mut state, &mut gibbs, z_index(), 1.0, 0.9, 0.75).unwrap();
        assert_eq!(r.substeps, 1);
        assert!(!r.stalled);
        assert!((r.delta + 0.9).abs() < 1e-15);
        assert!((r.eta - 0.975).abs() < 1e-12);
        let tz = state.sigma_pv.coeffs()[z_index()];
        assert!((tz - (0.675 * beta).tanh()).abs() < 1e-12);
        assert!((tz - 0.0421).abs() < 1e-4);
        assert!(((tz - 0.9).abs() - 0.858).abs() < 1e-3);
    }

    #[test]
    fn v2_backtracks_on_overshoot() {
        let beta = (1.0f64 / 257.0).sqrt();
        let mut state = MimicState::initial(1).unwrap();
        let mut gibbs = GibbsMap::new(beta);
        let r = update_v2(&mut state, &mut gibbs, z_index(), 1.0, 0.4, 1e6).unwrap();
        assert!(r.substeps >= 2);
        assert!(!r.stalled);
        let residual = (state.sigma_pv.coeffs()[z_index()] - 0.4).abs();
        assert!(residual < 0.4);
    }

    #[test]
    fn v2_floor_returns_unchanged() {
        let mut state = MimicState::initial(1).unwrap();
        let mut gibbs = GibbsMap::new(0.1);
        let r = update_v2(&mut state, &mut gibbs, z_index(), 1.0, 0.9, 1e-21).unwrap();
        assert!(r.stalled);
        assert_eq!(r.substeps, 0);
        assert_eq!(gibbs.evaluations(), 0);
        assert!(state.terms.is_empty());
    }

    #[test]
    fn empty_support_is_feasible_immediately() {
        let rho = PauliVector::maximally_mixed(2).unwrap();
        let table = MagnitudeTable::exact(&rho);
        for v in [Variant::V1, Variant::V2] {
            let res = solve_mimicking(&table, &SolverConfig::new(0.3, v), &rho).unwrap();
            assert!(res.feasible);
            assert_eq!(res.iterations, 0);
            assert_eq!(res.gibbs_evaluations, 0);
            let mixed = DensityOperator::maximally_mixed(2).unwrap();
            assert!((res.sigma.matrix() - mixed.matrix()).norm() < 1e-15);
        }
    }

    #[test]
    fn ghz_small_converges_with_certificate() {
        let rho = make_stabilizer_state(StateFamily::Ghz, 3).unwrap().to_pauli_vector();
        let table = MagnitudeTable::exact(&rho);
        for v in [Variant::V1, Variant::V2] {
            let cfg = SolverConfig::new(0.34, v);
            let res = solve_mimicking(&table, &cfg, &rho).unwrap();
            assert!(res.feasible, "{v}");
            assert!(res.iterations <= res.iteration_cap);
            assert!(certificate_holds(res.sigma_pv.coeffs(), table.u_hat(), 0.34));
            res.sigma.validate().unwrap();
            assert_eq!(res.trace.len(), res.iterations);
            let evals: u64 = res.trace.iter().map(|s| s.substeps).sum();
            assert_eq!(evals, res.gibbs_evaluations);
        }
    }
}
