//! Retained MCMC draws and their JSON-lines file layout.
//!
//! The first line is a header object with `"block": "header"`. Every other
//! line is one parameter block of one draw:
//!
//! ```text
//! {"iteration": 15010, "block": "pi", "values": [0.33, 0.34, 0.33]}
//! ```
//!
//! Blocks per draw, in order: `C` (one-based labels), `pi`, `theta0`
//! (`K × Σd_j`), `lambda` and `theta1` (subpopulations concatenated),
//! `nu` (`S × p`), `beta`, `xi`, `delta`, `assign_prob` (`n × K`),
//! `loglik` (`[joint, outcome]`). A final `g_mean` block (iteration 0)
//! holds the per-(subject, variable) frequency of `G = 1`.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::Params;
use crate::model::{ModelState, Mode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub iteration: usize,
    pub c: Vec<usize>,
    pub pi: Vec<f64>,
    pub theta0: Vec<f64>,
    pub lambda: Vec<Vec<f64>>,
    pub theta1: Vec<Vec<f64>>,
    pub nu: Vec<f64>,
    pub beta: Vec<f64>,
    pub xi: Vec<f64>,
    pub delta: Vec<f64>,
    pub assign_prob: Vec<f64>,
    /// Joint observed-data log-likelihood at this draw.
    pub loglik: f64,
    pub outcome_loglik: f64,
}

impl Draw {
    pub fn from_state(iteration: usize, state: &ModelState, loglik: f64, outcome_loglik: f64) -> Self {
        Self {
            iteration,
            c: state.c.clone(),
            pi: state.pi.clone(),
            theta0: state.theta0.clone(),
            lambda: state.lambda.clone(),
            theta1: state.theta1.clone(),
            nu: state.nu.clone(),
            beta: state.beta.clone(),
            xi: state.probit.xi.clone(),
            delta: state.probit.delta.clone(),
            assign_prob: state.assign_prob.clone(),
            loglik,
            outcome_loglik,
        }
    }

    pub fn params(&self, s0: f64) -> Params<'_> {
        Params {
            pi: &self.pi,
            theta0: &self.theta0,
            lambda: &self.lambda,
            theta1: &self.theta1,
            xi: &self.xi,
            delta: &self.delta,
            s0,
        }
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }
}

/// One chain's fixed-phase output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub mode: Mode,
    pub n: usize,
    pub p: usize,
    pub n_subpops: usize,
    pub n_outcomes: usize,
    pub levels: Vec<usize>,
    pub k: usize,
    pub ks: Vec<usize>,
    pub s0: f64,
    pub draws: Vec<Draw>,
    /// Frequency of `G_ij = 1` over the retained draws, `n × p`.
    pub g_mean: Vec<f64>,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Hard global/local indicators: `G_ij = 1` when it held in at least
    /// half the draws.
    pub fn g_hat(&self) -> Vec<bool> {
        self.g_mean.iter().map(|&m| m >= 0.5).collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = Header {
            block: "header".into(),
            mode: self.mode,
            n: self.n,
            p: self.p,
            n_subpops: self.n_subpops,
            n_outcomes: self.n_outcomes,
            levels: self.levels.clone(),
            k: self.k,
            ks: self.ks.clone(),
            s0: self.s0,
            n_draws: self.draws.len(),
        };
        let io = |e| Error::io(path, e);
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(io)?;
        let mut emit = |iteration: usize, block: &str, values: Vec<f64>| -> Result<()> {
            serde_json::to_writer(
                &mut w,
                &Record {
                    iteration,
                    block: block.to_string(),
                    values,
                },
            )?;
            w.write_all(b"\n").map_err(io)
        };
        for d in &self.draws {
            let t = d.iteration;
            emit(t, "C", d.c.iter().map(|&c| (c + 1) as f64).collect())?;
            emit(t, "pi", d.pi.clone())?;
            emit(t, "theta0", d.theta0.clone())?;
            emit(t, "lambda", d.lambda.concat())?;
            emit(t, "theta1", d.theta1.concat())?;
            emit(t, "nu", d.nu.clone())?;
            emit(t, "beta", d.beta.clone())?;
            emit(t, "xi", d.xi.clone())?;
            emit(t, "delta", d.delta.clone())?;
            emit(t, "assign_prob", d.assign_prob.clone())?;
            emit(t, "loglik", vec![d.loglik, d.outcome_loglik])?;
        }
        emit(0, "g_mean", self.g_mean.clone())?;
        w.flush().map_err(io)?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let bad = |line: usize, message: String| Error::Parse {
            row: line,
            column: String::new(),
            message,
        };
        let first = lines
            .next()
            .ok_or_else(|| bad(1, "empty trace file".into()))?
            .map_err(|e| Error::io(path, e))?;
        let header: Header = serde_json::from_str(&first)?;
        if header.block != "header" {
            return Err(bad(1, "first line must be the header block".into()));
        }
        let width: usize = header.levels.iter().sum();
        let mut trace = ChainTrace {
            mode: header.mode,
            n: header.n,
            p: header.p,
            n_subpops: header.n_subpops,
            n_outcomes: header.n_outcomes,
            levels: header.levels.clone(),
            k: header.k,
            ks: header.ks.clone(),
            s0: header.s0,
            draws: Vec::with_capacity(header.n_draws),
            g_mean: Vec::new(),
        };
        let mut current: Option<Draw> = None;
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line)?;
            let lineno = lineno + 2;
            if rec.block == "g_mean" {
                trace.g_mean = rec.values;
                continue;
            }
            if rec.block == "C" {
                if let Some(d) = current.take() {
                    trace.draws.push(d);
                }
                if rec.values.iter().any(|&v| !(v >= 1.0 && v <= header.k as f64 && v.fract() == 0.0)) {
                    return Err(bad(lineno, format!("C labels must be integers in 1..={}", header.k)));
                }
                current = Some(Draw {
                    iteration: rec.iteration,
                    c: rec.values.iter().map(|&v| v as usize - 1).collect(),
                    pi: vec![],
                    theta0: vec![],
                    lambda: vec![],
                    theta1: vec![],
                    nu: vec![],
                    beta: vec![],
                    xi: vec![],
                    delta: vec![],
                    assign_prob: vec![],
                    loglik: f64::NAN,
                    outcome_loglik: f64::NAN,
                });
                continue;
            }
            let d = current
                .as_mut()
                .filter(|d| d.iteration == rec.iteration)
                .ok_or_else(|| bad(lineno, format!("block '{}' outside a draw", rec.block)))?;
            match rec.block.as_str() {
                "pi" => d.pi = rec.values,
                "theta0" => d.theta0 = rec.values,
                "lambda" => d.lambda = split_ragged(&rec.values, &header.ks, 1),
                "theta1" => d.theta1 = split_ragged(&rec.values, &header.ks, width),
                "nu" => d.nu = rec.values,
                "beta" => d.beta = rec.values,
                "xi" => d.xi = rec.values,
                "delta" => d.delta = rec.values,
                "assign_prob" => d.assign_prob = rec.values,
                "loglik" => {
                    if rec.values.len() != 2 {
                        return Err(bad(lineno, "loglik block needs two values".into()));
                    }
                    d.loglik = rec.values[0];
                    d.outcome_loglik = rec.values[1];
                }
                other => return Err(bad(lineno, format!("unknown block '{other}'"))),
            }
        }
        if let Some(d) = current.take() {
            trace.draws.push(d);
        }
        Ok(trace)
    }
}

fn split_ragged(values: &[f64], ks: &[usize], width: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(ks.len());
    let mut off = 0;
    for &k in ks {
        let len = k * width;
        out.push(values[off..off + len].to_vec());
        off += len;
    }
    out
}

#[derive(Serialize, Deserialize)]
struct Header {
    block: String,
    mode: Mode,
    n: usize,
    p: usize,
    n_subpops: usize,
    n_outcomes: usize,
    levels: Vec<usize>,
    k: usize,
    ks: Vec<usize>,
    s0: f64,
    n_draws: usize,
}

#[derive(Serialize, Deserialize)]
struct Record {
    iteration: usize,
    block: String,
    values: Vec<f64>,
}
