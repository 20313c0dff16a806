//! Command-line front end: argument definitions, configuration layering and
//! the four batch commands.
//!
//! Settings resolve as command-line flags, then the JSON `--config` file,
//! then built-in defaults. A config file looks like
//!
//! ```json
//! {
//!   "seed": 7,
//!   "simulation": { "n_per_subpop": 300 },
//!   "sampler": { "adaptive_iters": 2000, "adaptive_burnin": 1000 },
//!   "hyper": { "k0": 30 },
//!   "local_spec": "local.json"
//! }
//! ```

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, CategoricalDataset, CsvSchema};
use crate::error::{Error, Result};
use crate::model::{Hyperparameters, Mode, SamplerConfig};
use crate::postprocess::{
    analyze, evaluate, write_modal_patterns_csv, write_nu_heatmap_csv, write_summary_json,
    MetricBundle,
};
use crate::sampler::{run_adaptive, AdaptiveResult, FixedSampler, LogEntry};
use crate::simulate::{simulate_replicate, LocalSpec, SimulationCase, SimulationConfig, SimulationTruth};
use crate::stats::ChainRng;
use crate::study::{aggregate, run_study_replicate, write_detail_csv, ReplicateResult};
use crate::trace::ChainTrace;

#[derive(Debug, Parser)]
#[command(name = "osrpc", version, about = "Supervised profile clustering with an ordinal outcome")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate replicate datasets and their ground truth.
    Simulate(SimulateArgs),
    /// Run the adaptive and fixed sampling phases on one dataset.
    Fit(FitArgs),
    /// Relabel a trace and write posterior summaries (and metrics with --truth).
    Summarize(SummarizeArgs),
    /// Run or aggregate a simulation study into a model × case table.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads for replicate-level parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SamplerArgs {
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub adaptive_iters: Option<usize>,
    /// Defaults to half the adaptive iterations.
    #[arg(long)]
    pub adaptive_burnin: Option<usize>,
    #[arg(long)]
    pub fixed_iters: Option<usize>,
    /// Burn-in of the fixed phase.
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Minimum mean occupancy for a cluster to survive the adaptive phase.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub k0: Option<usize>,
    #[arg(long)]
    pub ks: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulationArgs {
    #[arg(long)]
    pub case: Option<SimulationCase>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub n_per_subpop: Option<usize>,
    #[arg(long)]
    pub n_subpops: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    /// One-based JSON map: variable → {subpopulation → favoured level}.
    #[arg(long)]
    pub local_spec: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub sim: SimulationArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long)]
    pub input: PathBuf,
    /// Continue an interrupted fit from the checkpoint in `--out`.
    #[arg(long)]
    pub resume: bool,
    /// Fixed-phase iterations between checkpoints.
    #[arg(long, default_value_t = 1000)]
    pub checkpoint_every: usize,
    /// Independent chains; with more than one, chain `c` writes to
    /// `--out/chain{c}`.
    #[arg(long)]
    pub chains: Option<usize>,
    /// Stop after this many fixed-phase iterations, leaving a checkpoint.
    #[arg(long, hide = true)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset the trace was fitted to.
    #[arg(long)]
    pub input: PathBuf,
    /// Trace file; defaults to `trace.jsonl` in `--out`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Replicate number recorded with the metrics.
    #[arg(long)]
    pub replicate: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub sim: SimulationArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Aggregate existing `metrics.json` files under this directory instead
    /// of running the study.
    #[arg(long)]
    pub metrics_dir: Option<PathBuf>,
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub simulation: Option<SimulationConfig>,
    pub sampler: Option<SamplerConfig>,
    pub hyper: Option<Hyperparameters>,
    pub local_spec: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub chains: Option<usize>,
    pub modes: Option<Vec<Mode>>,
    pub cases: Option<Vec<SimulationCase>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut file: ConfigFile = serde_json::from_str(&text)?;
        if let Some(spec) = &file.local_spec {
            if spec.is_relative() {
                if let Some(dir) = path.parent() {
                    file.local_spec = Some(dir.join(spec));
                }
            }
        }
        Ok(file)
    }
}

/// Fully resolved settings of one command.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub simulation: SimulationConfig,
    pub sampler: SamplerConfig,
    pub hyper: Hyperparameters,
    pub out: PathBuf,
    pub jobs: usize,
    pub n_chains: usize,
    pub modes: Vec<Mode>,
    pub cases: Vec<SimulationCase>,
}

impl RunConfig {
    pub fn resolve(common: &CommonArgs, sim: Option<&SimulationArgs>, sampler: Option<&SamplerArgs>) -> Result<Self> {
        let file = match &common.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let seed = common.seed.or(file.seed);
        let mut simulation = file.simulation.unwrap_or_default();
        let mut sampler_cfg = file.sampler.unwrap_or_default();
        let mut hyper = file.hyper.unwrap_or_default();
        let mut local_spec_path = file.local_spec;
        let mut cases = file.cases.unwrap_or_else(|| {
            vec![SimulationCase::GlobalOnly, SimulationCase::GlobalLocalHybrid]
        });

        if let Some(a) = sim {
            if let Some(c) = a.case {
                simulation.case = c;
                cases = vec![c];
            }
            set(&mut simulation.n_replicates, a.replicates);
            set(&mut simulation.n_per_subpop, a.n_per_subpop);
            set(&mut simulation.n_subpops, a.n_subpops);
            set(&mut simulation.p, a.p);
            set(&mut simulation.d, a.d);
            if a.local_spec.is_some() {
                local_spec_path = a.local_spec.clone();
            }
        }
        if let Some(path) = local_spec_path {
            simulation.local_spec = Some(LocalSpec::load(&path)?);
        }
        let mut modes = file.modes.unwrap_or_else(|| vec![Mode::OsLcm, Mode::OsRpc]);
        if let Some(a) = sampler {
            if let Some(m) = a.mode {
                sampler_cfg.mode = m;
                modes = vec![m];
            }
            if let Some(iters) = a.adaptive_iters {
                sampler_cfg.adaptive_iters = iters;
                if a.adaptive_burnin.is_none() {
                    sampler_cfg.adaptive_burnin = iters / 2;
                }
            }
            set(&mut sampler_cfg.adaptive_burnin, a.adaptive_burnin);
            set(&mut sampler_cfg.fixed_iters, a.fixed_iters);
            set(&mut sampler_cfg.fixed_burnin, a.burnin);
            set(&mut sampler_cfg.thin, a.thin);
            set(&mut sampler_cfg.nonempty_threshold, a.threshold);
            set(&mut hyper.k0, a.k0);
            set(&mut hyper.ks, a.ks);
        }
        if let Some(s) = seed {
            simulation.seed = s;
            sampler_cfg.seed = s;
        }
        Ok(Self {
            seed,
            simulation,
            sampler: sampler_cfg,
            hyper,
            out: common.out.clone(),
            jobs: common.jobs.or(file.jobs).unwrap_or(1).max(1),
            n_chains: file.chains.unwrap_or(1).max(1),
            modes,
            cases,
        })
    }

    fn require_seed(&self, command: &str) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config(format!("{command} needs --seed (or \"seed\" in the config file)")))
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&RunConfig::resolve(&a.common, Some(&a.sim), None)?).map(|_| ()),
        Command::Fit(a) => cmd_fit(&a),
        Command::Summarize(a) => cmd_summarize(&a).map(|_| ()),
        Command::Compare(a) => cmd_compare(&a).map(|_| ()),
    }
}

/// File stem of replicate `k` (one-based) of a case.
pub fn replicate_stem(k: usize, case: SimulationCase) -> String {
    format!("rep{k}_{}", case.tag())
}

/// Writes `rep{k}_{case}.csv` and `rep{k}_{case}.truth.json` for every
/// replicate; returns the CSV paths.
pub fn cmd_simulate(config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.require_seed("simulate")?;
    config.simulation.validate()?;
    ensure_dir(&config.out)?;
    let mut paths = Vec::new();
    for k in 0..config.simulation.n_replicates {
        let (data, truth) = simulate_replicate(&config.simulation, k)?;
        let stem = replicate_stem(k + 1, config.simulation.case);
        let csv_path = config.out.join(format!("{stem}.csv"));
        data.write_csv(&csv_path)?;
        truth.write_json(&config.out.join(format!("{stem}.truth.json")))?;
        paths.push(csv_path);
    }
    log::info!("wrote {} replicate(s) to {}", paths.len(), config.out.display());
    Ok(paths)
}

/// Adaptive-phase outcome kept next to the checkpoint so a resumed fit can
/// finish the run record.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct AdaptiveRecord {
    k_active: usize,
    ks_active: Vec<usize>,
    global_occupancy: Vec<f64>,
    local_occupancy: Vec<Vec<f64>>,
    log: Vec<LogEntry>,
}

/// Run record written at the end of a fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitRecord {
    pub mode: Mode,
    pub seed: u64,
    /// One-based.
    pub chain: u64,
    pub input: PathBuf,
    pub k_active: usize,
    pub ks_active: Vec<usize>,
    pub global_occupancy: Vec<f64>,
    pub retained_draws: usize,
    pub sampler: SamplerConfig,
    pub hyper: Hyperparameters,
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let mut config = RunConfig::resolve(&args.common, None, Some(&args.sampler))?;
    if let Some(n) = args.chains {
        config.n_chains = n.max(1);
    }
    ensure_dir(&config.out)?;
    let data = load_csv(&args.input, &CsvSchema::default())?;
    if config.n_chains == 1 {
        return fit_chain(args, &config, &data, &config.out, 0);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        use rayon::prelude::*;
        (0..config.n_chains)
            .into_par_iter()
            .map(|c| {
                let dir = config.out.join(format!("chain{}", c + 1));
                ensure_dir(&dir)?;
                fit_chain(args, &config, &data, &dir, c as u64)
            })
            .collect::<Result<Vec<()>>>()
    })?;
    Ok(())
}

/// One chain of `fit`, writing everything into `out`.
fn fit_chain(args: &FitArgs, config: &RunConfig, data: &CategoricalDataset, out: &Path, chain: u64) -> Result<()> {
    let checkpoint = out.join("checkpoint.json");
    let adaptive_path = out.join("adaptive.json");

    let (mut sampler, adaptive) = if args.resume {
        let sampler = FixedSampler::load_checkpoint(&checkpoint)?;
        let adaptive: AdaptiveRecord = read_json(&adaptive_path)?;
        (sampler, adaptive)
    } else {
        let seed = config.require_seed("fit")?;
        let mut rng = ChainRng::new(seed, 0, chain);
        let AdaptiveResult {
            k_active,
            ks_active,
            global_occupancy,
            local_occupancy,
            state,
            log,
        } = run_adaptive(data, &config.sampler, &config.hyper, &mut rng)?;
        log::info!("adaptive phase retained K = {k_active}, Ks = {ks_active:?}");
        let record = AdaptiveRecord {
            k_active,
            ks_active,
            global_occupancy,
            local_occupancy,
            log,
        };
        write_json(&record, &adaptive_path)?;
        let sampler = FixedSampler::new(state, rng, config.sampler.clone(), config.hyper.clone())?;
        sampler.save_checkpoint(&checkpoint)?;
        (sampler, record)
    };

    let every = args.checkpoint_every.max(1);
    let stop = args.stop_after.unwrap_or(usize::MAX).min(sampler.config.fixed_iters);
    while sampler.iteration < stop {
        let target = (sampler.iteration / every + 1) * every;
        sampler.run_until(data, target.min(stop))?;
        sampler.save_checkpoint(&checkpoint)?;
    }
    if !sampler.is_done() {
        log::info!("stopped at iteration {}; resume with --resume", sampler.iteration);
        return Ok(());
    }

    let mut log = adaptive.log.clone();
    log.extend(sampler.log.iter().cloned());
    write_log(&log, &out.join("fit_log.csv"))?;
    let record = FitRecord {
        mode: sampler.config.mode,
        seed: sampler.config.seed,
        chain: chain + 1,
        input: args.input.clone(),
        k_active: adaptive.k_active,
        ks_active: adaptive.ks_active.clone(),
        global_occupancy: adaptive.global_occupancy.clone(),
        retained_draws: sampler.draws.len(),
        sampler: sampler.config.clone(),
        hyper: sampler.hyper.clone(),
    };
    let trace = sampler.finish(data);
    trace.write_jsonl(&out.join("trace.jsonl"))?;
    write_json(&record, &out.join("fit.json"))?;
    log::info!("fit complete: {} draws, K = {}", trace.len(), trace.k);
    Ok(())
}

fn write_log(log: &[LogEntry], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["phase", "iteration", "loglik", "outcome_loglik", "occupied_clusters"])?;
    for e in log {
        w.write_record([
            e.phase.clone(),
            e.iteration.to_string(),
            e.loglik.to_string(),
            e.outcome_loglik.to_string(),
            e.occupied.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Metrics file written by `summarize --truth`, read back by `compare`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsFile {
    pub case: SimulationCase,
    pub replicate: usize,
    pub metrics: MetricBundle,
}

pub fn cmd_summarize(args: &SummarizeArgs) -> Result<Option<MetricBundle>> {
    let out = &args.common.out;
    ensure_dir(out)?;
    let data: CategoricalDataset = load_csv(&args.input, &CsvSchema::default())?;
    let trace_path = args.trace.clone().unwrap_or_else(|| out.join("trace.jsonl"));
    let trace = ChainTrace::read_jsonl(&trace_path)?;
    let (_, summary) = analyze(&trace, &data, trace.k)?;
    let metrics = match &args.truth {
        Some(path) => {
            let truth = SimulationTruth::load_json(path)?;
            let m = evaluate(&summary, &truth, &data)?;
            let file = MetricsFile {
                case: truth.case,
                replicate: args.replicate.unwrap_or(1),
                metrics: m.clone(),
            };
            write_json(&file, &out.join("metrics.json"))?;
            Some(m)
        }
        None => None,
    };
    write_summary_json(&summary, metrics.as_ref(), &out.join("summary.json"))?;
    write_modal_patterns_csv(&summary, &out.join("modal_patterns.csv"))?;
    write_nu_heatmap_csv(&summary, &out.join("nu_heatmap.csv"))?;
    Ok(metrics)
}

fn collect_metrics(dir: &Path, out: &mut Vec<ReplicateResult>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_metrics(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "metrics.json") {
            let file: MetricsFile = read_json(&path)?;
            out.push(ReplicateResult {
                case: file.case,
                replicate: file.replicate,
                metrics: file.metrics,
                seconds: f64::NAN,
            });
        }
    }
    Ok(())
}

/// Writes `table.csv` (metrics × model/case means) and `detail.csv`.
pub fn cmd_compare(args: &CompareArgs) -> Result<Vec<ReplicateResult>> {
    let config = RunConfig::resolve(&args.common, Some(&args.sim), Some(&args.sampler))?;
    ensure_dir(&config.out)?;
    let mut results = Vec::new();
    if let Some(dir) = &args.metrics_dir {
        collect_metrics(dir, &mut results)?;
        if results.is_empty() {
            return Err(Error::Config(format!("no metrics.json under {}", dir.display())));
        }
    } else {
        config.require_seed("compare")?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        for &case in &config.cases {
            let sim = SimulationConfig {
                case,
                ..config.simulation.clone()
            };
            let per_rep: Vec<Result<Vec<ReplicateResult>>> = pool.install(|| {
                use rayon::prelude::*;
                (0..sim.n_replicates)
                    .into_par_iter()
                    .map(|k| run_study_replicate(&sim, &config.modes, &config.sampler, &config.hyper, k))
                    .collect()
            });
            for r in per_rep {
                results.extend(r?);
            }
        }
    }
    let table = aggregate(&results);
    table.write_csv(&config.out.join("table.csv"))?;
    write_detail_csv(&results, &config.out.join("detail.csv"))?;
    Ok(results)
}
