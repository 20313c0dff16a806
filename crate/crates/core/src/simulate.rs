//! Synthetic data with known structure: three global consumption patterns,
//! optionally overlaid with subpopulation-specific local deviations, and a
//! three-level outcome whose risk depends on the pattern and subpopulation.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::CategoricalDataset;
use crate::error::{Error, Result};
use crate::stats::{sample_categorical, stream, RngStream};

/// Probability of the favoured level of a pattern.
pub const FAVORED_PROB: f64 = 0.85;
pub const N_PATTERNS: usize = 3;
pub const N_OUTCOME_LEVELS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SimulationCase {
    /// Case A: every variable follows the subject's global pattern.
    #[serde(rename = "A")]
    GlobalOnly,
    /// Case B: some variables follow a subpopulation-specific pattern.
    #[serde(rename = "B")]
    GlobalLocalHybrid,
}

impl SimulationCase {
    pub fn tag(self) -> &'static str {
        match self {
            SimulationCase::GlobalOnly => "A",
            SimulationCase::GlobalLocalHybrid => "B",
        }
    }
}

impl std::str::FromStr for SimulationCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(SimulationCase::GlobalOnly),
            "B" | "b" => Ok(SimulationCase::GlobalLocalHybrid),
            other => Err(Error::Config(format!("unknown case '{other}' (expected A or B)"))),
        }
    }
}

/// Local deviations: variable → (subpopulation → favoured level).
/// Zero-based in memory; the JSON form is one-based,
/// `{"41": {"1": 1, "2": 2}, ...}`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LocalSpec(pub BTreeMap<usize, BTreeMap<usize, usize>>);

impl LocalSpec {
    /// Variables 41–50 (scaled to `p`) local in every subpopulation, with
    /// subpopulation `s` favouring level `s mod d`.
    pub fn default_for(p: usize, n_subpops: usize, d: usize) -> Self {
        let first = p - (p / 5).max(1);
        let mut map = BTreeMap::new();
        for j in first..p {
            let per_s = (0..n_subpops).map(|s| (s, s % d)).collect();
            map.insert(j, per_s);
        }
        LocalSpec(map)
    }

    pub fn favored(&self, j: usize, s: usize) -> Option<usize> {
        self.0.get(&j).and_then(|m| m.get(&s)).copied()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, BTreeMap<String, usize>> = serde_json::from_str(text)?;
        let parse = |k: &str, what: &str| -> Result<usize> {
            match k.trim().parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(Error::Config(format!("local spec {what} '{k}' must be >= 1"))),
            }
        };
        let mut map = BTreeMap::new();
        for (j, per_s) in raw {
            let mut inner = BTreeMap::new();
            for (s, level) in per_s {
                if level == 0 {
                    return Err(Error::Config("local spec levels are one-based".into()));
                }
                inner.insert(parse(&s, "subpopulation")?, level - 1);
            }
            map.insert(parse(&j, "variable")?, inner);
        }
        Ok(LocalSpec(map))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let map: BTreeMap<String, BTreeMap<String, usize>> = self
            .0
            .iter()
            .map(|(j, per_s)| {
                (
                    (j + 1).to_string(),
                    per_s
                        .iter()
                        .map(|(s, l)| ((s + 1).to_string(), l + 1))
                        .collect(),
                )
            })
            .collect();
        serde_json::to_value(map).expect("string-keyed map serialises")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SimulationConfig {
    pub case: SimulationCase,
    pub n_per_subpop: usize,
    pub n_subpops: usize,
    pub p: usize,
    pub d: usize,
    pub n_replicates: usize,
    pub seed: u64,
    /// Share of the non-top outcome mass given to the lowest category.
    pub outcome_split: f64,
    /// `Pr(y = 3)` range per pattern; subpopulations take evenly spaced
    /// values inside each range.
    pub risk_ranges: [(f64, f64); N_PATTERNS],
    #[serde(skip)]
    pub local_spec: Option<LocalSpec>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            case: SimulationCase::GlobalOnly,
            n_per_subpop: 1200,
            n_subpops: 4,
            p: 50,
            d: 4,
            n_replicates: 500,
            seed: 0,
            outcome_split: 0.5,
            risk_ranges: [(0.97, 0.99), (0.14, 0.22), (0.46, 0.58)],
            local_spec: None,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_subpop == 0 || self.n_subpops == 0 || self.p == 0 || self.n_replicates == 0
        {
            return Err(Error::Config("simulation counts must be positive".into()));
        }
        if self.d < 2 || self.d > 255 {
            return Err(Error::Config(format!("d = {} must be in 2..=255", self.d)));
        }
        if !(0.0..=1.0).contains(&self.outcome_split) {
            return Err(Error::Config("outcome_split must lie in [0, 1]".into()));
        }
        for &(lo, hi) in &self.risk_ranges {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::Config(format!("invalid risk range ({lo}, {hi})")));
            }
        }
        if let Some(spec) = &self.local_spec {
            for (&j, per_s) in &spec.0 {
                if j >= self.p {
                    return Err(Error::Config(format!("local variable {} > p", j + 1)));
                }
                for (&s, &l) in per_s {
                    if s >= self.n_subpops || l >= self.d {
                        return Err(Error::Config(format!(
                            "local spec entry (variable {}, subpop {}, level {}) out of range",
                            j + 1,
                            s + 1,
                            l + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n_per_subpop * self.n_subpops
    }

    /// Local specification in force for this case (empty for case A).
    pub fn effective_local_spec(&self) -> LocalSpec {
        match self.case {
            SimulationCase::GlobalOnly => LocalSpec::default(),
            SimulationCase::GlobalLocalHybrid => self
                .local_spec
                .clone()
                .unwrap_or_else(|| LocalSpec::default_for(self.p, self.n_subpops, self.d)),
        }
    }
}

/// Favoured (zero-based) level of each pattern for each variable.
///
/// Pattern 1: level 3 on the first half, level 1 after. Pattern 2: level 2
/// on the first fifth, the top level after. Pattern 3: level 1 on the first
/// fifth, level 2 on the next two fifths, level 3 after. Levels above `d`
/// are clamped to `d`.
pub fn global_favored_levels(p: usize, d: usize) -> [Vec<usize>; N_PATTERNS] {
    let cut = |frac: f64| (p as f64 * frac).round() as usize;
    let clamp = |level: usize| level.min(d) - 1;
    let pattern = |segments: &[(usize, usize)]| -> Vec<usize> {
        (0..p)
            .map(|j| {
                let level = segments
                    .iter()
                    .find(|(end, _)| j < *end)
                    .map(|&(_, l)| l)
                    .unwrap_or(segments.last().unwrap().1);
                clamp(level)
            })
            .collect()
    };
    [
        pattern(&[(cut(0.5), 3), (p, 1)]),
        pattern(&[(cut(0.2), 2), (p, 5)]),
        pattern(&[(cut(0.2), 1), (cut(0.6), 2), (p, 3)]),
    ]
}

fn favored_row(d: usize, favored: usize) -> Vec<f64> {
    let other = (1.0 - FAVORED_PROB) / (d - 1) as f64;
    (0..d)
        .map(|r| if r == favored { FAVORED_PROB } else { other })
        .collect()
}

/// Ground truth behind a simulated dataset (zero-based in memory).
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationTruth {
    pub case: SimulationCase,
    pub true_c: Vec<usize>,
    /// `pattern × variable × level`.
    pub true_theta0: Vec<Vec<Vec<f64>>>,
    /// `variable × subpopulation`; `true` = globally generated.
    pub true_g: Vec<Vec<bool>>,
    pub true_local_patterns: LocalSpec,
    /// `Pr(y = highest)` per `pattern × subpopulation`.
    pub true_outcome_prob: Vec<Vec<f64>>,
    pub outcome_split: f64,
}

impl SimulationTruth {
    /// Full outcome distribution for a pattern and subpopulation.
    pub fn outcome_probs(&self, pattern: usize, s: usize) -> [f64; N_OUTCOME_LEVELS] {
        let top = self.true_outcome_prob[pattern][s];
        let rest = 1.0 - top;
        [rest * self.outcome_split, rest * (1.0 - self.outcome_split), top]
    }

    /// Binary truth for ν: 1 where a variable is global in a subpopulation.
    pub fn true_nu(&self) -> Vec<Vec<f64>> {
        self.true_g
            .iter()
            .map(|row| row.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    pub fn n_patterns(&self) -> usize {
        self.true_theta0.len()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = TruthFile::from(self);
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: TruthFile = serde_json::from_str(&text)?;
        file.try_into()
    }
}

// One-based wire form of the truth.
#[derive(Serialize, Deserialize)]
struct TruthFile {
    case: SimulationCase,
    true_c: Vec<usize>,
    true_theta0: Vec<Vec<Vec<f64>>>,
    true_g: Vec<Vec<u8>>,
    true_local_patterns: serde_json::Value,
    true_outcome_prob: Vec<Vec<f64>>,
    outcome_split: f64,
}

impl From<&SimulationTruth> for TruthFile {
    fn from(t: &SimulationTruth) -> Self {
        Self {
            case: t.case,
            true_c: t.true_c.iter().map(|c| c + 1).collect(),
            true_theta0: t.true_theta0.clone(),
            true_g: t
                .true_g
                .iter()
                .map(|r| r.iter().map(|&g| g as u8).collect())
                .collect(),
            true_local_patterns: t.true_local_patterns.to_json_value(),
            true_outcome_prob: t.true_outcome_prob.clone(),
            outcome_split: t.outcome_split,
        }
    }
}

impl TryFrom<TruthFile> for SimulationTruth {
    type Error = Error;

    fn try_from(f: TruthFile) -> Result<Self> {
        if f.true_c.contains(&0) {
            return Err(Error::Config("truth cluster labels are one-based".into()));
        }
        Ok(Self {
            case: f.case,
            true_c: f.true_c.iter().map(|c| c - 1).collect(),
            true_theta0: f.true_theta0,
            true_g: f
                .true_g
                .iter()
                .map(|r| r.iter().map(|&g| g != 0).collect())
                .collect(),
            true_local_patterns: LocalSpec::from_json_str(&f.true_local_patterns.to_string())?,
            true_outcome_prob: f.true_outcome_prob,
            outcome_split: f.outcome_split,
        })
    }
}

fn risk_levels(config: &SimulationConfig) -> Vec<Vec<f64>> {
    let s = config.n_subpops;
    config
        .risk_ranges
        .iter()
        .map(|&(lo, hi)| {
            (0..s)
                .map(|k| {
                    if s == 1 {
                        0.5 * (lo + hi)
                    } else {
                        lo + (hi - lo) * k as f64 / (s - 1) as f64
                    }
                })
                .collect()
        })
        .collect()
}

/// Generate one dataset and its truth. Subjects are laid out subpopulation
/// by subpopulation, each assigned a pattern uniformly at random.
pub fn simulate(
    config: &SimulationConfig,
    rng: &mut RngStream,
) -> Result<(CategoricalDataset, SimulationTruth)> {
    config.validate()?;
    let (n, p, d, s_count) = (config.n(), config.p, config.d, config.n_subpops);
    let favored = global_favored_levels(p, d);
    let true_theta0: Vec<Vec<Vec<f64>>> = favored
        .iter()
        .map(|levels| levels.iter().map(|&l| favored_row(d, l)).collect())
        .collect();
    let local = config.effective_local_spec();
    let true_g: Vec<Vec<bool>> = (0..p)
        .map(|j| (0..s_count).map(|s| local.favored(j, s).is_none()).collect())
        .collect();
    let risk = risk_levels(config);
    let split = config.outcome_split;

    let mut x = Vec::with_capacity(n * p);
    let mut subpop = Vec::with_capacity(n);
    let mut outcome = Vec::with_capacity(n);
    let mut true_c = Vec::with_capacity(n);
    let local_rows: BTreeMap<(usize, usize), Vec<f64>> = local
        .0
        .iter()
        .flat_map(|(&j, per_s)| per_s.iter().map(move |(&s, &l)| ((j, s), l)))
        .map(|(key, l)| (key, favored_row(d, l)))
        .collect();
    for s in 0..s_count {
        for _ in 0..config.n_per_subpop {
            let pattern = rng.random_range(0..N_PATTERNS);
            for j in 0..p {
                let probs = local_rows
                    .get(&(j, s))
                    .unwrap_or(&true_theta0[pattern][j]);
                let level = sample_categorical(probs, rng).expect("valid level table");
                x.push(level as u8);
            }
            let top = risk[pattern][s];
            let probs = [(1.0 - top) * split, (1.0 - top) * (1.0 - split), top];
            outcome.push(sample_categorical(&probs, rng).expect("valid outcome table"));
            subpop.push(s);
            true_c.push(pattern);
        }
    }
    let dataset = CategoricalDataset::new(
        x,
        n,
        p,
        vec![d; p],
        subpop,
        outcome,
        s_count,
        N_OUTCOME_LEVELS,
        None,
    )?;
    let truth = SimulationTruth {
        case: config.case,
        true_c,
        true_theta0,
        true_g,
        true_local_patterns: local,
        true_outcome_prob: risk,
        outcome_split: split,
    };
    Ok((dataset, truth))
}

/// Replicate `k` (zero-based) of a study, drawn from its own stream.
pub fn simulate_replicate(
    config: &SimulationConfig,
    k: usize,
) -> Result<(CategoricalDataset, SimulationTruth)> {
    let mut rng = RngStream::new(
        config.seed,
        stream::id(k as u64, 0, stream::ROLE_SIMULATE),
    );
    simulate(config, &mut rng)
}
