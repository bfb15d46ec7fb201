//! Sweep execution: one work unit per (state, mu, Stage-1 seed), run in a
//! rayon pool, written to CSV in plan order by a single consumer.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use shadow_core::mimic::{solve_mimicking, MimicResult, SolverConfig, Variant};
use shadow_core::signs::{run_stage3, Stage3Config};
use shadow_core::support::{run_stage1, threshold_support, MagnitudeTable, Stage1Config};
use shadow_core::{PauliVector, StateFamily, TestStateSpec};

use crate::config::{BenchConfig, StateSlot};
use crate::error::{BenchError, Result};
use crate::records::{read_records_file, ExperimentRecord, RecordWriter};
use crate::seeds::{state_seed, RunKey};

pub const RESULTS_FILE: &str = "results.csv";
const PARTIAL_SUFFIX: &str = ".partial";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unit {
    pub slot: StateSlot,
    pub state_seed: u64,
    pub mu_index: usize,
    pub mu: f64,
    pub epsilon: f64,
    pub seed_index: usize,
}

impl Unit {
    fn key(&self, stage: u8, variant: Option<Variant>, trial: u32) -> RunKey {
        RunKey {
            family: self.slot.family,
            n: self.slot.n,
            k: self.slot.k,
            state_seed: self.state_seed,
            mu_index: self.mu_index,
            seed_index: self.seed_index,
            stage,
            variant,
            trial,
        }
    }

    pub fn state_spec(&self) -> TestStateSpec {
        match self.slot.family {
            StateFamily::Gibbs => TestStateSpec::gibbs(self.slot.n, self.slot.k as usize, self.state_seed),
            f => TestStateSpec::stabilizer(f, self.slot.n),
        }
    }

    /// Run seeds of every record this unit produces, in output order.
    pub fn run_seeds(&self, cfg: &BenchConfig) -> Result<Vec<u64>> {
        let m = cfg.master_seed;
        let mut out = vec![self.key(1, None, 0).run_seed(m)];
        let variants = cfg.variants()?;
        for &v in &variants {
            out.push(self.key(2, Some(v), 0).run_seed(m));
        }
        for &v in &variants {
            for t in 0..cfg.stage3.trials {
                out.push(self.key(3, Some(v), t).run_seed(m));
            }
        }
        Ok(out)
    }
}

/// Units in canonical order: suite, state, mu, seed.
pub fn plan(cfg: &BenchConfig) -> Result<Vec<Unit>> {
    let grid = cfg.accuracy_grid();
    let mut units = Vec::new();
    for suite in &cfg.suites {
        for slot in suite.slots()? {
            let seed = match slot.family {
                StateFamily::Gibbs => state_seed(cfg.master_seed, slot.n, slot.index),
                _ => 0,
            };
            for (mu_index, &(mu, epsilon)) in grid.iter().enumerate() {
                for seed_index in 0..suite.seeds {
                    units.push(Unit {
                        slot,
                        state_seed: seed,
                        mu_index,
                        mu,
                        epsilon,
                        seed_index,
                    });
                }
            }
        }
    }
    Ok(units)
}

fn base_record(unit: &Unit, stage: u8, variant: Option<Variant>, run_seed: u64) -> ExperimentRecord {
    ExperimentRecord {
        state_family: unit.slot.family.to_string(),
        n: unit.slot.n,
        k: unit.slot.k,
        state_seed: unit.state_seed,
        run_seed,
        epsilon: unit.epsilon,
        mu: unit.mu,
        stage,
        variant: variant.map_or("-".to_string(), |v| v.to_string()),
        samples_used: None,
        iterations: None,
        substeps: None,
        feasible: false,
        jaccard_final: None,
        mse_final: None,
        agreement_final: None,
        support_size: None,
        wall_time_ms: 0.0,
        error: None,
    }
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Everything computed for one unit, for callers that need more than records.
pub struct UnitOutput {
    pub records: Vec<ExperimentRecord>,
    pub rho: Option<PauliVector>,
    pub table: Option<MagnitudeTable>,
    pub mimics: Vec<(Variant, MimicResult)>,
}

/// Runs Stage 1, then Stage 2 per variant, then Stage 3 trials per
/// mimicking state. A failure is recorded on the failing run and on every
/// run downstream of it.
pub fn run_unit(cfg: &BenchConfig, unit: &Unit) -> Result<UnitOutput> {
    let variants = cfg.variants()?;
    let s1_schedule = cfg.stage1_schedule()?;
    let s3_schedule = cfg.stage3_schedule()?;
    let sign_source = cfg.sign_source()?;
    let master = cfg.master_seed;
    let seeds = unit.run_seeds(cfg)?;
    let mut records: Vec<ExperimentRecord> = Vec::with_capacity(seeds.len());
    let mut out = UnitOutput {
        records: Vec::new(),
        rho: None,
        table: None,
        mimics: Vec::new(),
    };

    let fail_rest = |records: &mut Vec<ExperimentRecord>, msg: &str| {
        let done = records.len();
        let mut i = 0;
        let mut push = |stage, v| {
            if i >= done {
                let mut r = base_record(unit, stage, v, seeds[i]);
                r.error = Some(msg.to_string());
                records.push(r);
            }
            i += 1;
        };
        push(1, None);
        for &v in &variants {
            push(2, Some(v));
        }
        for &v in &variants {
            for _ in 0..cfg.stage3.trials {
                push(3, Some(v));
            }
        }
    };

    let t = Instant::now();
    let rho = match unit.state_spec().build() {
        Ok(st) => st.rho.to_pauli_vector(),
        Err(e) => {
            fail_rest(&mut records, &format!("state: {e}"));
            out.records = records;
            return Ok(out);
        }
    };
    let state_ms = elapsed_ms(t);

    let t = Instant::now();
    let s1_seed = unit.key(1, None, 0).run_seed(master);
    let mut s1 = Stage1Config::new(unit.mu, s1_seed);
    s1.schedule = s1_schedule;
    s1.cap = cfg.stage1.cap;
    s1.jaccard_target = cfg.stage1.jaccard_target;
    let stage1 = match run_stage1(&rho, &s1) {
        Ok(o) => o,
        Err(e) => {
            fail_rest(&mut records, &format!("stage 1: {e}"));
            out.records = records;
            return Ok(out);
        }
    };
    let mut r = base_record(unit, 1, None, s1_seed);
    r.samples_used = Some(stage1.samples);
    r.feasible = stage1.threshold_met;
    r.jaccard_final = Some(stage1.jaccard);
    r.support_size = Some(stage1.estimated.len() as u64);
    r.wall_time_ms = state_ms + elapsed_ms(t);
    records.push(r);

    let table = if cfg.stage2.exact_magnitudes {
        MagnitudeTable::exact(&rho)
    } else {
        stage1.table.clone()
    };
    let support = match threshold_support(&table, unit.mu, false) {
        Ok(s) => s,
        Err(e) => {
            fail_rest(&mut records, &format!("support: {e}"));
            out.records = records;
            return Ok(out);
        }
    };

    let mut mimics = Vec::new();
    for &v in &variants {
        let t = Instant::now();
        let seed = unit.key(2, Some(v), 0).run_seed(master);
        let mut sc = SolverConfig::new(unit.epsilon, v);
        sc.sign_source = sign_source;
        sc.sign_seed = seed;
        sc.max_iterations = cfg.stage2.max_iterations;
        sc.eta0 = cfg.stage2.eta0;
        let mut r = base_record(unit, 2, Some(v), seed);
        r.support_size = Some(support.len() as u64);
        match solve_mimicking(&table, &sc, &rho) {
            Ok(res) => {
                r.iterations = Some(res.iterations as u64);
                r.substeps = Some(res.substeps());
                r.feasible = res.feasible;
                r.wall_time_ms = elapsed_ms(t);
                mimics.push(Some((v, res)));
            }
            Err(e) => {
                r.error = Some(format!("stage 2: {e}"));
                mimics.push(None);
            }
        }
        records.push(r);
    }

    for (i, &v) in variants.iter().enumerate() {
        for trial in 0..cfg.stage3.trials {
            let seed = unit.key(3, Some(v), trial).run_seed(master);
            let mut r = base_record(unit, 3, Some(v), seed);
            r.support_size = Some(support.len() as u64);
            let Some((_, res)) = &mimics[i] else {
                r.error = Some("stage 2 failed".into());
                records.push(r);
                continue;
            };
            let t = Instant::now();
            let mut c3 = Stage3Config::new(unit.mu, seed);
            c3.schedule = s3_schedule;
            c3.cap = cfg.stage3.cap;
            c3.agreement_target = cfg.stage3.agreement_target;
            match run_stage3(&rho, &res.sigma_pv, &table, &support, &c3) {
                Ok(o) => {
                    r.samples_used = Some(o.samples);
                    r.feasible = o.target_met;
                    r.mse_final = Some(o.mse);
                    r.agreement_final = Some(o.agreement);
                    r.wall_time_ms = elapsed_ms(t);
                }
                Err(e) => r.error = Some(format!("stage 3: {e}")),
            }
            records.push(r);
        }
    }

    out.records = records;
    out.rho = Some(rho);
    out.table = Some(table);
    out.mimics = mimics.into_iter().flatten().collect();
    Ok(out)
}

fn run_unit_guarded(cfg: &BenchConfig, unit: &Unit) -> Vec<ExperimentRecord> {
    let result = catch_unwind(AssertUnwindSafe(|| run_unit(cfg, unit)));
    let msg = match result {
        Ok(Ok(out)) => return out.records,
        Ok(Err(e)) => e.to_string(),
        Err(p) => p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into()),
    };
    let seeds = unit.run_seeds(cfg).unwrap_or_default();
    let variants = cfg.variants().unwrap_or_default();
    let mut shape = vec![(1u8, None)];
    shape.extend(variants.iter().map(|&v| (2u8, Some(v))));
    for &v in &variants {
        shape.extend((0..cfg.stage3.trials).map(|_| (3u8, Some(v))));
    }
    shape
        .into_iter()
        .zip(seeds)
        .map(|((stage, v), seed)| {
            let mut r = base_record(unit, stage, v, seed);
            r.error = Some(format!("unit failed: {msg}"));
            r
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides the config's thread count when set.
    pub threads: Option<usize>,
    /// Reuse complete units from an earlier run in the same directory.
    pub resume: bool,
    pub progress: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSummary {
    pub units: usize,
    pub reused: usize,
    pub records: usize,
    pub failed_records: usize,
    pub path: PathBuf,
}

fn load_previous(dir: &Path) -> Result<HashMap<u64, ExperimentRecord>> {
    let mut map = HashMap::new();
    for name in [RESULTS_FILE.to_string(), format!("{RESULTS_FILE}{PARTIAL_SUFFIX}")] {
        let p = dir.join(name);
        if p.exists() {
            for r in read_records_file(&p)? {
                map.insert(r.run_seed, r);
            }
        }
    }
    Ok(map)
}

/// Runs the whole sweep into `dir/results.csv`.
///
/// Records stream into `results.csv.partial` in plan order and the file is
/// renamed once the sweep finishes. With `resume`, units whose records are
/// all present in either file are copied instead of recomputed.
pub fn run_benchmark(cfg: &BenchConfig, dir: &Path, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let units = plan(cfg)?;
    let previous = if opts.resume { load_previous(dir)? } else { HashMap::new() };

    let mut ready: BTreeMap<usize, Vec<ExperimentRecord>> = BTreeMap::new();
    let mut todo = Vec::new();
    for (i, u) in units.iter().enumerate() {
        let seeds = u.run_seeds(cfg)?;
        match seeds.iter().map(|s| previous.get(s).cloned()).collect::<Option<Vec<_>>>() {
            Some(rs) => {
                ready.insert(i, rs);
            }
            None => todo.push((i, *u)),
        }
    }
    let reused = ready.len();
    drop(previous);

    let partial = dir.join(format!("{RESULTS_FILE}{PARTIAL_SUFFIX}"));
    let file = OpenOptions::new().create(true).write(true).truncate(true).open(&partial)?;
    let mut writer = RecordWriter::new(BufWriter::new(file))?;

    let threads = opts.threads.unwrap_or(cfg.threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let (tx, rx) = mpsc::channel::<(usize, Vec<ExperimentRecord>)>();
    let total = units.len();
    let mut next = 0usize;
    let (mut records, mut failed) = (0usize, 0usize);

    std::thread::scope(|scope| -> Result<()> {
        let todo = &todo;
        scope.spawn(move || {
            pool.install(|| {
                todo.par_iter().for_each_with(tx, |tx, (i, u)| {
                    let _ = tx.send((*i, run_unit_guarded(cfg, u)));
                });
            });
        });
        let mut flush_ready = |ready: &mut BTreeMap<usize, Vec<ExperimentRecord>>| -> Result<()> {
            while let Some(rs) = ready.remove(&next) {
                records += rs.len();
                failed += rs.iter().filter(|r| r.error.is_some()).count();
                writer.write_all(&rs)?;
                next += 1;
                if opts.progress {
                    eprintln!("[{next}/{total}]");
                }
            }
            Ok(())
        };
        flush_ready(&mut ready)?;
        for (i, rs) in rx {
            ready.insert(i, rs);
            flush_ready(&mut ready)?;
        }
        Ok(())
    })?;

    drop(writer.into_inner()?);
    let path = dir.join(RESULTS_FILE);
    fs::rename(&partial, &path)?;
    Ok(RunSummary {
        units: total,
        reused,
        records,
        failed_records: failed,
        path,
    })
}
