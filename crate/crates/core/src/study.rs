//! Simulation study: simulate replicates, fit both models, score them and
//! aggregate into a comparison table.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::CategoricalDataset;
use crate::error::{Error, Result};
use crate::model::{Hyperparameters, Mode, SamplerConfig};
use crate::postprocess::{analyze, evaluate, MetricBundle, PosteriorSummary};
use crate::sampler::{fit, Fit};
use crate::simulate::{simulate_replicate, SimulationCase, SimulationConfig, SimulationTruth};
use crate::stats::ChainRng;

/// One fitted and scored replicate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub case: SimulationCase,
    /// One-based.
    pub replicate: usize,
    pub metrics: MetricBundle,
    pub seconds: f64,
}

/// Fit one dataset and post-process it. The chain's streams are keyed by
/// `(seed, replicate)` so every replicate is independently reproducible.
pub fn fit_and_summarize(
    data: &CategoricalDataset,
    sampler: &SamplerConfig,
    hyper: &Hyperparameters,
    replicate: u64,
) -> Result<(Fit, PosteriorSummary)> {
    let rng = ChainRng::new(sampler.seed, replicate, 0);
    let fitted = fit(data, sampler, hyper, rng)?;
    let (relabeled, summary) = analyze(&fitted.trace, data, fitted.k_active)?;
    Ok((Fit { trace: relabeled, ..fitted }, summary))
}

pub fn run_replicate(
    sim: &SimulationConfig,
    truth_and_data: (&CategoricalDataset, &SimulationTruth),
    sampler: &SamplerConfig,
    hyper: &Hyperparameters,
    replicate: usize,
) -> Result<ReplicateResult> {
    let (data, truth) = truth_and_data;
    let start = Instant::now();
    let (_, summary) = fit_and_summarize(data, sampler, hyper, replicate as u64)?;
    let metrics = evaluate(&summary, truth, data)?;
    Ok(ReplicateResult {
        case: sim.case,
        replicate: replicate + 1,
        metrics,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Simulate replicate `k` (zero-based) and fit every requested mode on it.
pub fn run_study_replicate(
    sim: &SimulationConfig,
    modes: &[Mode],
    sampler: &SamplerConfig,
    hyper: &Hyperparameters,
    k: usize,
) -> Result<Vec<ReplicateResult>> {
    let (data, truth) = simulate_replicate(sim, k)?;
    modes
        .iter()
        .map(|&mode| {
            let config = SamplerConfig {
                mode,
                ..sampler.clone()
            };
            run_replicate(sim, (&data, &truth), &config, hyper, k)
        })
        .collect()
}

/// Column order of the comparison table.
pub const TABLE_COLUMNS: [(Mode, SimulationCase); 4] = [
    (Mode::OsLcm, SimulationCase::GlobalOnly),
    (Mode::OsRpc, SimulationCase::GlobalOnly),
    (Mode::OsLcm, SimulationCase::GlobalLocalHybrid),
    (Mode::OsRpc, SimulationCase::GlobalLocalHybrid),
];

pub fn column_name(mode: Mode, case: SimulationCase) -> String {
    format!("{}-{}", mode.name(), case.tag())
}

/// Mean of each metric per (model, case) column.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<(String, [Option<f64>; 4])>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn aggregate(results: &[ReplicateResult]) -> ComparisonTable {
    let n_patterns = results
        .iter()
        .map(|r| r.metrics.pattern_classification.len())
        .max()
        .unwrap_or(0);
    type Getter = Box<dyn Fn(&MetricBundle) -> Option<f64>>;
    let mut metrics: Vec<(String, Getter)> = vec![
        ("K_pred".into(), Box::new(|m| Some(m.k_pred as f64))),
        ("DIC".into(), Box::new(|m| Some(m.dic))),
        ("P(Y)_MSE".into(), Box::new(|m| Some(m.p_y_mse))),
        ("Y_ord".into(), Box::new(|m| Some(m.y_ord))),
    ];
    for t in 0..n_patterns {
        metrics.push((
            format!("Pattern {} Classification", t + 1),
            Box::new(move |m| m.pattern_classification.get(t).copied()),
        ));
    }
    metrics.push(("nu_MSE".into(), Box::new(|m| m.nu_mse)));

    let rows = metrics
        .into_iter()
        .map(|(name, get)| {
            let mut cells = [None; 4];
            for (c, (mode, case)) in TABLE_COLUMNS.iter().enumerate() {
                let vals: Vec<f64> = results
                    .iter()
                    .filter(|r| r.metrics.mode == *mode && r.case == *case)
                    .filter_map(|r| get(&r.metrics))
                    .collect();
                cells[c] = mean(&vals);
            }
            (name, cells)
        })
        .collect();
    ComparisonTable { rows }
}

impl ComparisonTable {
    pub fn get(&self, metric: &str, mode: Mode, case: SimulationCase) -> Option<f64> {
        let col = TABLE_COLUMNS.iter().position(|c| *c == (mode, case))?;
        self.rows.iter().find(|(n, _)| n == metric)?.1[col]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["metric".to_string()];
        header.extend(TABLE_COLUMNS.iter().map(|&(m, c)| column_name(m, c)));
        w.write_record(&header)?;
        for (name, cells) in &self.rows {
            let mut row = vec![name.clone()];
            row.extend(cells.iter().map(|c| c.map_or(String::new(), |v| format!("{v:.6}"))));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// One line per (replicate, model).
pub fn write_detail_csv(results: &[ReplicateResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let n_patterns = results
        .iter()
        .map(|r| r.metrics.pattern_classification.len())
        .max()
        .unwrap_or(0);
    let mut header: Vec<String> = ["case", "model", "replicate", "k_pred", "dic", "p_y_mse", "y_ord"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=n_patterns).map(|t| format!("pattern{t}_classification")));
    header.extend(["nu_mse".to_string(), "seconds".to_string()]);
    w.write_record(&header)?;
    for r in results {
        let m = &r.metrics;
        let mut row = vec![
            r.case.tag().to_string(),
            m.mode.name().to_string(),
            r.replicate.to_string(),
            m.k_pred.to_string(),
            m.dic.to_string(),
            m.p_y_mse.to_string(),
            m.y_ord.to_string(),
        ];
        row.extend((0..n_patterns).map(|t| {
            m.pattern_classification
                .get(t)
                .map_or(String::new(), |v| v.to_string())
        }));
        row.push(m.nu_mse.map_or(String::new(), |v| v.to_string()));
        row.push(format!("{:.3}", r.seconds));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
