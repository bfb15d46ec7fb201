use std::fs;
use std::io::stdout;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use shadow_bench::config::{BenchConfig, StateSlot};
use shadow_bench::export::{write_figures, write_table1};
use shadow_bench::fit::{table1, FitMode};
use shadow_bench::records::{read_records_file, RecordWriter};
use shadow_bench::runner::{run_benchmark, run_unit, RunOptions, Unit};
use shadow_core::io::{load_density, load_text, save_density, save_text, StateHeader};
use shadow_core::mimic::{solve_mimicking, SignSource, SolverConfig, Variant};
use shadow_core::schedule::BlockSchedule;
use shadow_core::signs::{run_stage3, Stage3Config, STAGE3_CAP};
use shadow_core::support::{run_stage1, threshold_support, MagnitudeTable, Stage1Config, STAGE1_CAP};
use shadow_core::{StateFamily, TestStateSpec};

#[derive(Parser)]
#[command(name = "shadow", version, about = "Two-copy Pauli shadow tomography simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a test state and write it as rho.bin (plus hamiltonian.txt for Gibbs).
    GenStates(GenStates),
    /// Estimate magnitudes by Bell sampling rho ⊗ rho.
    Stage1(Stage1Args),
    /// Search for a mimicking state.
    Mimic(MimicArgs),
    /// Recover signs by Bell sampling rho ⊗ sigma.
    Stage3(Stage3Args),
    /// Sweeps, fits and plots.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// One end-to-end run; prints its records as CSV.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct GenStates {
    #[arg(long)]
    family: StateFamily,
    #[arg(long)]
    n: usize,
    /// Hamiltonian term count (Gibbs).
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Stage1Args {
    /// Density operator file written by gen-states.
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = STAGE1_CAP)]
    cap: u64,
    #[arg(long, default_value = "geometric:1:1.05")]
    schedule: BlockSchedule,
    #[arg(long, default_value_t = 0.9)]
    jaccard_target: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MimicArgs {
    /// Directory holding rho.bin and magnitudes.txt.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value = "v2")]
    variant: Variant,
    #[arg(long, default_value = "oracle")]
    sign_source: SignSource,
    /// Use |tr(P rho)| instead of the Stage-1 estimates.
    #[arg(long)]
    exact_magnitudes: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Stage3Args {
    /// Directory holding rho.bin, sigma.bin and magnitudes.txt.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = STAGE3_CAP)]
    cap: u64,
    #[arg(long, default_value = "geometric:1:1.1")]
    schedule: BlockSchedule,
    /// Agreement threshold on |tr(P rho)|; defaults to 3 eps / 4.
    #[arg(long)]
    agreement_mu: Option<f64>,
    #[arg(long, default_value_t = 0.9)]
    agreement_target: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Run a sweep into <out>/results.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        /// Recompute everything instead of reusing complete units.
        #[arg(long)]
        no_resume: bool,
        #[arg(long)]
        quiet: bool,
    },
    /// Fit scaling exponents into a table.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        per_state: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render figures and their CSV mirrors.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    family: StateFamily,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    k: u64,
    #[arg(long, default_value_t = 0)]
    state_seed: u64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value = "v2")]
    variant: Variant,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: u32,
    #[arg(long)]
    exact_magnitudes: bool,
    /// Optional config supplying caps and schedules.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn state_path(dir: &Path) -> PathBuf {
    dir.join("rho.bin")
}

fn gen_states(a: GenStates) -> Result<()> {
    let spec = match a.family {
        StateFamily::Gibbs => TestStateSpec::gibbs(a.n, a.k, a.seed),
        f => TestStateSpec::stabilizer(f, a.n),
    };
    let st = spec.build()?;
    fs::create_dir_all(&a.out)?;
    let header = StateHeader {
        n: a.n,
        family: Some(a.family),
        k: if a.family == StateFamily::Gibbs { a.k as u64 } else { 0 },
        seed: a.seed,
    };
    save_density(&state_path(&a.out), &header, &st.rho)?;
    if let Some(h) = &st.hamiltonian {
        save_text(&a.out.join("hamiltonian.txt"), &h.to_text())?;
    }
    if st.degenerate {
        eprintln!("warning: zero Hamiltonian, state is maximally mixed");
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn stage1(a: Stage1Args) -> Result<()> {
    let (_, rho) = load_density(&a.state).with_context(|| format!("reading {}", a.state.display()))?;
    let rho = rho.to_pauli_vector();
    let mut cfg = Stage1Config::new(a.mu, a.seed);
    cfg.cap = a.cap;
    cfg.schedule = a.schedule;
    cfg.jaccard_target = a.jaccard_target;
    let out = run_stage1(&rho, &cfg)?;
    fs::create_dir_all(&a.out)?;
    save_text(&a.out.join("magnitudes.txt"), &out.table.to_text())?;
    let mut w = csv::Writer::from_path(a.out.join("stage1_trace.csv"))?;
    w.write_record(["samples", "jaccard"])?;
    for (m, j) in &out.trace {
        w.write_record([m.to_string(), j.to_string()])?;
    }
    w.flush()?;
    println!(
        "samples={} jaccard={:.4} target_met={} support={}",
        out.samples,
        out.jaccard,
        out.threshold_met,
        out.estimated.len()
    );
    Ok(())
}

fn mimic(a: MimicArgs) -> Result<()> {
    let (header, rho) = load_density(&state_path(&a.input))?;
    let rho = rho.to_pauli_vector();
    let table = if a.exact_magnitudes {
        MagnitudeTable::exact(&rho)
    } else {
        MagnitudeTable::from_text(&load_text(&a.input.join("magnitudes.txt"))?)?
    };
    let mut cfg = SolverConfig::new(a.epsilon, a.variant);
    cfg.sign_source = a.sign_source;
    cfg.sign_seed = a.seed;
    cfg.max_iterations = a.max_iterations;
    cfg.eta0 = a.eta0;
    let res = solve_mimicking(&table, &cfg, &rho)?;
    fs::create_dir_all(&a.out)?;
    save_density(&a.out.join("sigma.bin"), &StateHeader { family: None, ..header }, &res.sigma)?;
    save_text(&a.out.join("sigma_hamiltonian.txt"), &res.hamiltonian.to_text())?;
    let mut w = csv::Writer::from_path(a.out.join("mimic_trace.csv"))?;
    w.write_record(["step", "label", "delta", "eta", "gibbs_evaluations"])?;
    for (i, s) in res.trace.iter().enumerate() {
        w.write_record([i.to_string(), s.label.to_string(), s.delta.to_string(), s.eta.to_string(), s.substeps.to_string()])?;
    }
    w.flush()?;
    println!(
        "feasible={} iterations={} substeps={} eta_final={:.4e} stalled={} cap={}",
        res.feasible,
        res.iterations,
        res.substeps(),
        res.eta_final,
        res.stalled,
        res.iteration_cap
    );
    Ok(())
}

fn stage3(a: Stage3Args) -> Result<()> {
    let (_, rho) = load_density(&state_path(&a.input))?;
    let (_, sigma) = load_density(&a.input.join("sigma.bin"))?;
    let table = MagnitudeTable::from_text(&load_text(&a.input.join("magnitudes.txt"))?)?;
    let mu = 0.75 * a.epsilon;
    let support = threshold_support(&table, mu, false)?;
    let mut cfg = Stage3Config::new(a.agreement_mu.unwrap_or(mu), a.seed);
    cfg.cap = a.cap;
    cfg.schedule = a.schedule;
    cfg.agreement_target = a.agreement_target;
    let out = run_stage3(&rho.to_pauli_vector(), &sigma.to_pauli_vector(), &table, &support, &cfg)?;
    fs::create_dir_all(&a.out)?;
    let mut w = csv::Writer::from_path(a.out.join("stage3_trace.csv"))?;
    w.write_record(["samples", "mse", "agreement"])?;
    for p in &out.trace {
        w.write_record([p.samples.to_string(), p.mse.to_string(), p.agreement.to_string()])?;
    }
    w.flush()?;
    println!(
        "samples={} agreement={:.4} mse={:.6} target_met={}",
        out.samples, out.agreement, out.mse, out.target_met
    );
    Ok(())
}

fn bench(cmd: BenchCommand) -> Result<()> {
    match cmd {
        BenchCommand::Run { config, out, threads, no_resume, quiet } => {
            let cfg = BenchConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let opts = RunOptions {
                threads,
                resume: !no_resume,
                progress: !quiet,
            };
            let s = run_benchmark(&cfg, &out, &opts)?;
            println!(
                "units={} reused={} records={} failed={} -> {}",
                s.units,
                s.reused,
                s.records,
                s.failed_records,
                s.path.display()
            );
        }
        BenchCommand::Fit { input, out, per_state, seed } => {
            let rs = read_records_file(&input)?;
            let mode = if per_state { FitMode::PerState } else { FitMode::Pooled };
            write_table1(&table1(&rs, mode, seed), &out)?;
            println!("wrote {}", out.display());
        }
        BenchCommand::Plot { input, out, seed } => {
            let rs = read_records_file(&input)?;
            let t = table1(&rs, FitMode::Pooled, seed);
            let files = write_figures(&rs, &t, &out)?;
            write_table1(&t, &out.join("table1.csv"))?;
            println!("wrote {} files to {}", files.len() + 1, out.display());
        }
    }
    Ok(())
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    if !(a.epsilon > 0.0 && a.epsilon < 1.0) {
        bail!("epsilon must lie in (0, 1)");
    }
    let mut cfg = match &a.config {
        Some(p) => BenchConfig::load(p)?,
        None => BenchConfig::from_toml("")?,
    };
    cfg.master_seed = a.seed;
    cfg.variants = vec![a.variant.to_string()];
    cfg.stage3.trials = a.trials;
    cfg.stage2.exact_magnitudes |= a.exact_magnitudes;
    let k = if a.family == StateFamily::Gibbs { a.k } else { 0 };
    let unit = Unit {
        slot: StateSlot { family: a.family, n: a.n, index: 0, k },
        state_seed: a.state_seed,
        mu_index: 0,
        mu: 0.75 * a.epsilon,
        epsilon: a.epsilon,
        seed_index: 0,
    };
    let out = run_unit(&cfg, &unit)?;
    let mut w = RecordWriter::new(stdout().lock())?;
    w.write_all(&out.records)?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenStates(a) => gen_states(a),
        Command::Stage1(a) => stage1(a),
        Command::Mimic(a) => mimic(a),
        Command::Stage3(a) => stage3(a),
        Command::Bench { command } => bench(command),
        Command::Pipeline(a) => pipeline(a),
    }
}
