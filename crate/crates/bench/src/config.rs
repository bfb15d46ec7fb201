//! Sweep configuration, read from TOML.
//!
//! ```toml
//! master_seed = 1
//! threads = 0                 # 0: one worker per core
//! mu_grid = [0.05, 0.07, 0.11, 0.16, 0.23, 0.34, 0.5]
//! variants = ["v1", "v2"]
//!
//! [stage1]
//! cap = 30000000
//! schedule = "geometric:1:1.05"
//! jaccard_target = 0.9
//!
//! [stage2]
//! sign_source = "oracle"      # or "sampled:<shots>"
//! exact_magnitudes = false
//!
//! [stage3]
//! cap = 700000
//! schedule = "geometric:1:1.1"
//! agreement_target = 0.9
//! trials = 5
//!
//! [[suite]]
//! family = "Gibbs"
//! n = 4
//! states = 20                 # Gibbs only: k_j = floor(k_max^{j/states})
//! seeds = 3
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use shadow_core::mimic::{SignSource, Variant};
use shadow_core::schedule::BlockSchedule;
use shadow_core::states::{k_sequence, default_k_max};
use shadow_core::support::{JACCARD_TARGET, MU_GRID, STAGE1_CAP};
use shadow_core::signs::{AGREEMENT_TARGET, STAGE3_CAP};
use shadow_core::StateFamily;

use crate::error::{BenchError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_mu_grid")]
    pub mu_grid: Vec<f64>,
    #[serde(default = "default_variants")]
    pub variants: Vec<String>,
    #[serde(default)]
    pub stage1: Stage1Settings,
    #[serde(default)]
    pub stage2: Stage2Settings,
    #[serde(default)]
    pub stage3: Stage3Settings,
    #[serde(default, rename = "suite")]
    pub suites: Vec<Suite>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stage1Settings {
    pub cap: u64,
    pub schedule: String,
    pub jaccard_target: f64,
}

impl Default for Stage1Settings {
    fn default() -> Self {
        Self {
            cap: STAGE1_CAP,
            schedule: "geometric:1:1.05".into(),
            jaccard_target: JACCARD_TARGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stage2Settings {
    pub sign_source: String,
    pub exact_magnitudes: bool,
    pub max_iterations: Option<usize>,
    pub eta0: Option<f64>,
}

impl Default for Stage2Settings {
    fn default() -> Self {
        Self {
            sign_source: "oracle".into(),
            exact_magnitudes: false,
            max_iterations: None,
            eta0: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stage3Settings {
    pub cap: u64,
    pub schedule: String,
    pub agreement_target: f64,
    pub trials: u32,
}

impl Default for Stage3Settings {
    fn default() -> Self {
        Self {
            cap: STAGE3_CAP,
            schedule: "geometric:1:1.1".into(),
            agreement_target: AGREEMENT_TARGET,
            trials: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub family: String,
    pub n: usize,
    /// Number of Gibbs states; ignored for stabilizer families.
    #[serde(default = "default_states")]
    pub states: usize,
    /// Largest Hamiltonian term count; defaults to the reference value for `n`.
    #[serde(default)]
    pub k_max: Option<u64>,
    pub seeds: usize,
}

fn default_mu_grid() -> Vec<f64> {
    MU_GRID.to_vec()
}

fn default_variants() -> Vec<String> {
    vec!["v1".into(), "v2".into()]
}

fn default_states() -> usize {
    100
}

/// One input state of a suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateSlot {
    pub family: StateFamily,
    pub n: usize,
    /// Position within the suite, `0` for stabilizer states.
    pub index: usize,
    pub k: u64,
}

impl Suite {
    pub fn family(&self) -> Result<StateFamily> {
        self.family.parse().map_err(|e: shadow_core::Error| BenchError::Config(e.to_string()))
    }

    /// Gibbs suites get one state per `j = 1..=states` with `k_j` from the
    /// (non-deduplicated) geometric sequence.
    pub fn slots(&self) -> Result<Vec<StateSlot>> {
        let family = self.family()?;
        if family != StateFamily::Gibbs {
            return Ok(vec![StateSlot { family, n: self.n, index: 0, k: 0 }]);
        }
        let k_max = match self.k_max.or_else(|| default_k_max(self.n)) {
            Some(k) => k,
            None => return Err(BenchError::Config(format!("suite n={} needs k_max", self.n))),
        };
        Ok(k_sequence(k_max, self.states)
            .into_iter()
            .enumerate()
            .map(|(index, k)| StateSlot { family, n: self.n, index, k })
            .collect())
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: BenchConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.mu_grid.is_empty() || self.mu_grid.iter().any(|&m| !(m > 0.0 && m < 0.75)) {
            return bad(format!("mu grid must be non-empty within (0, 0.75): {:?}", self.mu_grid));
        }
        self.variants()?;
        self.stage1_schedule()?;
        self.stage3_schedule()?;
        self.sign_source()?;
        for s in &self.suites {
            s.family()?;
            if !(2..=shadow_core::pauli::MAX_QUBITS).contains(&s.n) {
                return bad(format!("suite n={} out of range", s.n));
            }
            if s.seeds == 0 || s.states == 0 {
                return bad("suite needs at least one state and one seed".into());
            }
        }
        Ok(())
    }

    pub fn variants(&self) -> Result<Vec<Variant>> {
        self.variants
            .iter()
            .map(|v| v.parse().map_err(|e: shadow_core::Error| BenchError::Config(e.to_string())))
            .collect()
    }

    pub fn stage1_schedule(&self) -> Result<BlockSchedule> {
        self.stage1
            .schedule
            .parse()
            .map_err(|e: shadow_core::Error| BenchError::Config(e.to_string()))
    }

    pub fn stage3_schedule(&self) -> Result<BlockSchedule> {
        self.stage3
            .schedule
            .parse()
            .map_err(|e: shadow_core::Error| BenchError::Config(e.to_string()))
    }

    pub fn sign_source(&self) -> Result<SignSource> {
        self.stage2
            .sign_source
            .parse()
            .map_err(|e: shadow_core::Error| BenchError::Config(e.to_string()))
    }

    /// `(mu, eps)` pairs with `mu == 0.75 * eps` exactly.
    pub fn accuracy_grid(&self) -> Vec<(f64, f64)> {
        self.mu_grid
            .iter()
            .map(|&m| {
                let eps = m / 0.75;
                (0.75 * eps, eps)
            })
            .collect()
    }
}
