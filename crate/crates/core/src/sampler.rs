//! Two-phase schedule: an adaptive run with the overfitted mixture that
//! picks the number of clusters, then a fixed-size run whose thinned draws
//! feed post-processing.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::CategoricalDataset;
use crate::error::{Error, Result};
use crate::gibbs::{permute_global, sweep};
use crate::likelihood::{joint_loglik, Params};
use crate::model::{Hyperparameters, ModelState, Mode, SamplerConfig};
use crate::stats::ChainRng;
use crate::trace::{ChainTrace, Draw};

/// One row of the fit log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub phase: String,
    pub iteration: usize,
    pub loglik: f64,
    pub outcome_loglik: f64,
    /// Global clusters holding at least one subject.
    pub occupied: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdaptiveResult {
    pub k_active: usize,
    pub ks_active: Vec<usize>,
    /// Mean post-burn-in share of subjects in each of the `K0` clusters.
    pub global_occupancy: Vec<f64>,
    /// Per subpopulation, mean share of local pairs in each local cluster.
    pub local_occupancy: Vec<Vec<f64>>,
    /// Pruned state the fixed phase starts from.
    pub state: ModelState,
    pub log: Vec<LogEntry>,
}

fn state_loglik(state: &ModelState, data: &CategoricalDataset, mode: Mode) -> f64 {
    let g = (mode == Mode::OsRpc).then_some(state.g.as_slice());
    joint_loglik(&Params::of(state), data, g)
}

fn occupied(state: &ModelState) -> usize {
    state.occupancy().iter().filter(|&&c| c > 0).count()
}

/// Run the adaptive phase and prune clusters whose mean post-burn-in
/// occupancy is below the threshold.
pub fn run_adaptive(
    data: &CategoricalDataset,
    config: &SamplerConfig,
    hyper: &Hyperparameters,
    rng: &mut ChainRng,
) -> Result<AdaptiveResult> {
    config.validate()?;
    let mut state = ModelState::initialize(data, hyper, config, rng)?;
    let (n, p, s_count) = (data.n(), data.p(), data.n_subpops());
    let local = config.mode == Mode::OsRpc;
    let k0 = state.k();
    let mut global_sum = vec![0.0; k0];
    let mut local_sum: Vec<Vec<f64>> = state.ks().iter().map(|&ks| vec![0.0; ks]).collect();
    let mut local_seen = vec![0usize; s_count];
    let mut kept = 0usize;
    let mut log = Vec::new();

    for t in 1..=config.adaptive_iters {
        let info = sweep(&mut state, data, config, hyper, rng)?;
        if t > config.adaptive_burnin {
            kept += 1;
            for (h, c) in state.occupancy().into_iter().enumerate() {
                global_sum[h] += c as f64 / n as f64;
            }
            if local {
                let mut counts: Vec<Vec<usize>> =
                    local_sum.iter().map(|v| vec![0; v.len()]).collect();
                for i in 0..n {
                    let s = data.subpop(i);
                    for j in 0..p {
                        if !state.g[i * p + j] {
                            counts[s][state.l[i * p + j]] += 1;
                        }
                    }
                }
                for (s, c) in counts.iter().enumerate() {
                    let total: usize = c.iter().sum();
                    if total > 0 {
                        local_seen[s] += 1;
                        for (l, &v) in c.iter().enumerate() {
                            local_sum[s][l] += v as f64 / total as f64;
                        }
                    }
                }
            }
        }
        if t % config.thin == 0 || t == config.adaptive_iters {
            let loglik = state_loglik(&state, data, config.mode);
            log::debug!("adaptive {t}: loglik {loglik:.2}");
            log.push(LogEntry {
                phase: "adaptive".into(),
                iteration: t,
                loglik,
                outcome_loglik: info.outcome_loglik,
                occupied: occupied(&state),
            });
        }
    }

    let global_occupancy: Vec<f64> = global_sum.iter().map(|v| v / kept as f64).collect();
    let mut retained: Vec<usize> = (0..k0)
        .filter(|&h| global_occupancy[h] >= config.nonempty_threshold)
        .collect();
    if retained.is_empty() {
        return Err(Error::DegenerateFit(format!(
            "no global cluster reached mean occupancy {}",
            config.nonempty_threshold
        )));
    }
    retained.sort_by(|&a, &b| global_occupancy[b].total_cmp(&global_occupancy[a]).then(a.cmp(&b)));

    let local_occupancy: Vec<Vec<f64>> = local_sum
        .iter()
        .zip(&local_seen)
        .map(|(v, &seen)| v.iter().map(|x| if seen > 0 { x / seen as f64 } else { 0.0 }).collect())
        .collect();
    let local_retained: Vec<Vec<usize>> = local_occupancy
        .iter()
        .map(|occ| {
            let mut keep: Vec<usize> =
                (0..occ.len()).filter(|&l| occ[l] >= config.nonempty_threshold).collect();
            if keep.is_empty() {
                let best = (0..occ.len()).max_by(|&a, &b| occ[a].total_cmp(&occ[b]).then(b.cmp(&a)));
                keep.push(best.unwrap_or(0));
            }
            keep.sort_by(|&a, &b| occ[b].total_cmp(&occ[a]).then(a.cmp(&b)));
            keep
        })
        .collect();

    let state = prune(&state, data, &retained, &local_retained);
    Ok(AdaptiveResult {
        k_active: retained.len(),
        ks_active: local_retained.iter().map(Vec::len).collect(),
        global_occupancy,
        local_occupancy,
        state,
        log,
    })
}

/// Restrict a state to the retained clusters, in the given order. Subjects
/// in dropped clusters move to their most probable retained one.
pub fn prune(
    state: &ModelState,
    data: &CategoricalDataset,
    retained: &[usize],
    local_retained: &[Vec<usize>],
) -> ModelState {
    let (n, p, s_count) = (data.n(), data.p(), data.n_subpops());
    let layout = data.layout();
    let width = layout.total();
    let k_old = state.k();
    let k = retained.len();
    let mut map = vec![usize::MAX; k_old];
    for (new, &old) in retained.iter().enumerate() {
        map[old] = new;
    }
    let c = (0..n)
        .map(|i| {
            let old = state.c[i];
            if map[old] != usize::MAX {
                return map[old];
            }
            let probs = &state.assign_prob[i * k_old..(i + 1) * k_old];
            (0..k)
                .max_by(|&a, &b| probs[retained[a]].total_cmp(&probs[retained[b]]).then(b.cmp(&a)))
                .unwrap_or(0)
        })
        .collect();
    let pi_raw: Vec<f64> = retained.iter().map(|&h| state.pi[h]).collect();
    let total: f64 = pi_raw.iter().sum();
    let pi = if total > 0.0 {
        pi_raw.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / k as f64; k]
    };
    let mut theta0 = Vec::with_capacity(k * width);
    for &h in retained {
        theta0.extend_from_slice(state.theta0_row(h, width));
    }
    let mut xi: Vec<f64> = state.probit.xi[..s_count].to_vec();
    xi.extend(retained.iter().map(|&h| state.probit.xi[s_count + h]));

    let (mut lambda, mut theta1, mut l) = (Vec::new(), Vec::new(), Vec::new());
    if !state.lambda.is_empty() {
        for (s, keep) in local_retained.iter().enumerate() {
            let raw: Vec<f64> = keep.iter().map(|&h| state.lambda[s][h]).collect();
            let tot: f64 = raw.iter().sum();
            lambda.push(if tot > 0.0 {
                raw.iter().map(|v| v / tot).collect()
            } else {
                vec![1.0 / keep.len() as f64; keep.len()]
            });
            let mut t = Vec::with_capacity(keep.len() * width);
            for &h in keep {
                t.extend_from_slice(&state.theta1[s][h * width..(h + 1) * width]);
            }
            theta1.push(t);
        }
        let maps: Vec<Vec<usize>> = local_retained
            .iter()
            .zip(state.ks())
            .map(|(keep, ks)| {
                let mut m = vec![usize::MAX; ks];
                for (new, &old) in keep.iter().enumerate() {
                    m[old] = new;
                }
                m
            })
            .collect();
        l = vec![0; n * p];
        for i in 0..n {
            let s = data.subpop(i);
            for j in 0..p {
                let old = state.l[i * p + j];
                l[i * p + j] = if maps[s][old] != usize::MAX {
                    maps[s][old]
                } else {
                    let idx = layout.index(j, data.x(i, j));
                    let score = |a: usize| lambda[s][a] * theta1[s][a * width + idx];
                    (0..lambda[s].len())
                        .max_by(|&a, &b| score(a).total_cmp(&score(b)).then(b.cmp(&a)))
                        .unwrap_or(0)
                };
            }
        }
    }

    let mut probit = state.probit.clone();
    probit.xi = xi;
    ModelState {
        c,
        l,
        g: state.g.clone(),
        pi,
        lambda,
        theta0,
        theta1,
        nu: state.nu.clone(),
        beta: state.beta.clone(),
        probit,
        assign_prob: vec![1.0 / k as f64; n * k],
    }
}

/// Resumable fixed-phase sampler. Serialising it to JSON gives a complete
/// checkpoint, random streams included.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixedSampler {
    pub state: ModelState,
    pub rng: ChainRng,
    pub config: SamplerConfig,
    pub hyper: Hyperparameters,
    /// Iterations completed so far.
    pub iteration: usize,
    pub draws: Vec<Draw>,
    pub log: Vec<LogEntry>,
    g_count: Vec<u32>,
}

impl FixedSampler {
    pub fn new(
        state: ModelState,
        rng: ChainRng,
        config: SamplerConfig,
        hyper: Hyperparameters,
    ) -> Result<Self> {
        config.validate()?;
        let g_count = vec![0; state.g.len()];
        let capacity = config.retained_draws();
        Ok(Self {
            state,
            rng,
            config,
            hyper,
            iteration: 0,
            draws: Vec::with_capacity(capacity),
            log: Vec::new(),
            g_count,
        })
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.config.fixed_iters
    }

    /// One iteration: sweep, optional random relabelling, then record the
    /// draw if it falls on the thinning grid after burn-in.
    pub fn step(&mut self, data: &CategoricalDataset) -> Result<()> {
        let info = sweep(&mut self.state, data, &self.config, &self.hyper, &mut self.rng)?;
        self.iteration += 1;
        let t = self.iteration;
        if self.config.permute_every > 0 && t.is_multiple_of(self.config.permute_every) {
            let mut perm: Vec<usize> = (0..self.state.k()).collect();
            perm.shuffle(&mut self.rng.global);
            permute_global(&mut self.state, &perm, data.n_subpops());
        }
        let record = t > self.config.fixed_burnin && (t - self.config.fixed_burnin).is_multiple_of(self.config.thin);
        let logged = t.is_multiple_of(self.config.thin);
        if record || logged {
            let loglik = state_loglik(&self.state, data, self.config.mode);
            if record {
                self.draws.push(Draw::from_state(t, &self.state, loglik, info.outcome_loglik));
                for (acc, &g) in self.g_count.iter_mut().zip(&self.state.g) {
                    *acc += g as u32;
                }
            }
            if logged {
                self.log.push(LogEntry {
                    phase: "fixed".into(),
                    iteration: t,
                    loglik,
                    outcome_loglik: info.outcome_loglik,
                    occupied: occupied(&self.state),
                });
            }
        }
        Ok(())
    }

    /// Advance until `target` iterations are complete (capped at the total).
    pub fn run_until(&mut self, data: &CategoricalDataset, target: usize) -> Result<()> {
        let target = target.min(self.config.fixed_iters);
        while self.iteration < target {
            self.step(data)?;
        }
        Ok(())
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }

    pub fn finish(self, data: &CategoricalDataset) -> ChainTrace {
        let count = self.draws.len().max(1) as f64;
        let g_mean = if self.config.mode == Mode::OsRpc {
            self.g_count.iter().map(|&c| c as f64 / count).collect()
        } else {
            vec![1.0; self.state.g.len()]
        };
        ChainTrace {
            mode: self.config.mode,
            n: data.n(),
            p: data.p(),
            n_subpops: data.n_subpops(),
            n_outcomes: data.n_outcomes(),
            levels: data.levels().to_vec(),
            k: self.state.k(),
            ks: self.state.ks(),
            s0: self.state.probit.s0,
            draws: self.draws,
            g_mean,
        }
    }
}

/// Run the whole fixed phase from a pruned state.
pub fn run_fixed(
    data: &CategoricalDataset,
    state: ModelState,
    config: &SamplerConfig,
    hyper: &Hyperparameters,
    rng: ChainRng,
) -> Result<(ChainTrace, Vec<LogEntry>)> {
    let mut sampler = FixedSampler::new(state, rng, config.clone(), hyper.clone())?;
    sampler.run_until(data, config.fixed_iters)?;
    let log = std::mem::take(&mut sampler.log);
    Ok((sampler.finish(data), log))
}

/// Output of one complete two-phase fit.
#[derive(Clone, Debug)]
pub struct Fit {
    pub k_active: usize,
    pub ks_active: Vec<usize>,
    pub global_occupancy: Vec<f64>,
    pub trace: ChainTrace,
    pub log: Vec<LogEntry>,
}

/// Adaptive then fixed phase with one chain's random streams.
pub fn fit(
    data: &CategoricalDataset,
    config: &SamplerConfig,
    hyper: &Hyperparameters,
    mut rng: ChainRng,
) -> Result<Fit> {
    let adaptive = run_adaptive(data, config, hyper, &mut rng)?;
    let (trace, fixed_log) = run_fixed(data, adaptive.state, config, hyper, rng)?;
    let mut log = adaptive.log;
    log.extend(fixed_log);
    Ok(Fit {
        k_active: adaptive.k_active,
        ks_active: adaptive.ks_active,
        global_occupancy: adaptive.global_occupancy,
        trace,
        log,
    })
}
