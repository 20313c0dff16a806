//! Post-MCMC analysis: label alignment through a co-assignment similarity
//! matrix, posterior medians, hard assignments, DIC and recovery metrics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::CategoricalDataset;
use crate::error::{Error, Result};
use crate::likelihood::{joint_loglik, Params};
use crate::model::Mode;
use crate::probit::category_probs;
use crate::simulate::SimulationTruth;
use crate::trace::{ChainTrace, Draw};

/// Co-assignment frequencies, `n × n` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    m: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.m
    }
}

pub fn build_similarity(trace: &ChainTrace) -> Result<SimilarityMatrix> {
    if trace.draws.is_empty() {
        return Err(Error::InvalidState("similarity of an empty trace".into()));
    }
    let n = trace.n;
    let mut counts = vec![0u32; n * n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for d in &trace.draws {
        let k = d.c.iter().copied().max().map_or(0, |m| m + 1);
        groups.clear();
        groups.resize(k, Vec::new());
        for (i, &c) in d.c.iter().enumerate() {
            groups[c].push(i);
        }
        for g in &groups {
            for (a, &i) in g.iter().enumerate() {
                let row = &mut counts[i * n..(i + 1) * n];
                for &j in &g[a..] {
                    row[j] += 1;
                }
            }
        }
    }
    let total = trace.draws.len() as f64;
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = counts[i * n + j] as f64 / total;
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    Ok(SimilarityMatrix { n, m })
}

/// Complete-linkage agglomerative clustering of `1 - similarity`, cut at
/// `k` groups. Groups are numbered by their first subject.
pub fn complete_linkage_labels(sim: &SimilarityMatrix, k: usize) -> Vec<usize> {
    let n = sim.n();
    if n == 0 {
        return Vec::new();
    }
    let k = k.clamp(1, n);
    let mut dist: Vec<f64> = sim.as_slice().iter().map(|s| 1.0 - s).collect();
    let merges = nn_chain(&mut dist, n);
    let mut order: Vec<usize> = (0..merges.len()).collect();
    order.sort_by(|&a, &b| merges[a].2.total_cmp(&merges[b].2));

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &m in order.iter().take(n - k) {
        let (a, b, _) = merges[m];
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[rb] = ra;
    }
    let mut label_of_root = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect()
}

/// Nearest-neighbour chain algorithm with the complete-linkage update.
/// Returns `(a, b, height)` for every merge; `a` stays the representative.
fn nn_chain(dist: &mut [f64], n: usize) -> Vec<(usize, usize, f64)> {
    let mut active = vec![true; n];
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while merges.len() + 1 < n {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("an active cluster remains"));
        }
        loop {
            let a = *chain.last().unwrap();
            let prev = (chain.len() >= 2).then(|| chain[chain.len() - 2]);
            let row = &dist[a * n..(a + 1) * n];
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| row[p]);
            for x in 0..n {
                if active[x] && x != a && row[x] < best_d {
                    best = Some(x);
                    best_d = row[x];
                }
            }
            let b = best.expect("two active clusters remain");
            if Some(b) == prev {
                chain.pop();
                chain.pop();
                let (a, b) = (a.min(b), a.max(b));
                merges.push((a, b, best_d));
                active[b] = false;
                for x in 0..n {
                    if active[x] && x != a {
                        let v = dist[a * n + x].max(dist[b * n + x]);
                        dist[a * n + x] = v;
                        dist[x * n + a] = v;
                    }
                }
                break;
            }
            chain.push(b);
        }
    }
    merges
}

/// `table[h][r]`: subjects with label `h` in the draw and `r` in the
/// reference.
fn contingency(labels: &[usize], reference: &[usize], k: usize, kr: usize) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0; kr]; k];
    for (&h, &r) in labels.iter().zip(reference) {
        if h < k && r < kr {
            table[h][r] += 1;
        }
    }
    table
}

/// Injective map from rows to columns (or unmatched, `None`) maximising the
/// summed table entries. Exhaustive when `exhaustive`, greedy otherwise.
/// The identity-like assignment is visited first so ties keep it.
fn best_matching(table: &[Vec<usize>], exhaustive: bool) -> Vec<Option<usize>> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if !exhaustive {
        let mut out = vec![None; rows];
        let mut row_used = vec![false; rows];
        let mut col_used = vec![false; cols];
        let mut cells: Vec<(usize, usize)> =
            (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).collect();
        // Stable sort: among equal counts the diagonal-first order wins.
        cells.sort_by_key(|&(r, c)| (std::cmp::Reverse(table[r][c]), r != c));
        for (r, c) in cells {
            if !row_used[r] && !col_used[c] {
                out[r] = Some(c);
                row_used[r] = true;
                col_used[c] = true;
            }
        }
        return out;
    }
    fn search(
        table: &[Vec<usize>],
        row: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<Option<usize>>,
        score: usize,
        best: &mut (usize, Vec<Option<usize>>, bool),
    ) {
        if row == table.len() {
            if !best.2 || score > best.0 {
                *best = (score, current.clone(), true);
            }
            return;
        }
        let cols = used.len();
        // Try the diagonal first, then the rest in order, then unmatched.
        let order = std::iter::once(row)
            .filter(|&c| c < cols)
            .chain((0..cols).filter(|&c| c != row));
        let candidates: Vec<usize> = order.collect();
        for c in candidates {
            if !used[c] {
                used[c] = true;
                current[row] = Some(c);
                search(table, row + 1, used, current, score + table[row][c], best);
                used[c] = false;
            }
        }
        let free = used.iter().filter(|u| !**u).count();
        if table.len() - row > free {
            current[row] = None;
            search(table, row + 1, used, current, score, best);
        }
    }
    let mut best = (0, vec![None; rows], false);
    search(table, 0, &mut vec![false; cols], &mut vec![None; rows], 0, &mut best);
    best.1
}

/// Largest K for which per-draw permutations are searched exhaustively.
pub const EXHAUSTIVE_RELABEL_MAX_K: usize = 6;

impl Draw {
    /// Relabel the global clusters: old label `h` becomes `perm[h]`.
    pub fn permute(&mut self, perm: &[usize], n_covariates: usize) {
        let k = self.k();
        let width = self.theta0.len() / k.max(1);
        self.c.iter_mut().for_each(|c| *c = perm[*c]);
        let (pi, theta0, xi) = (self.pi.clone(), self.theta0.clone(), self.xi.clone());
        for h in 0..k {
            let to = perm[h];
            self.pi[to] = pi[h];
            self.theta0[to * width..(to + 1) * width]
                .copy_from_slice(&theta0[h * width..(h + 1) * width]);
            self.xi[n_covariates + to] = xi[n_covariates + h];
        }
        let n = self.c.len();
        if self.assign_prob.len() == n * k {
            let probs = self.assign_prob.clone();
            for i in 0..n {
                for h in 0..k {
                    self.assign_prob[i * k + perm[h]] = probs[i * k + h];
                }
            }
        }
    }
}

/// Align every draw's global labels with the complete-linkage reference
/// classes cut at `k_active` groups.
pub fn relabel_trace(trace: &ChainTrace, sim: &SimilarityMatrix, k_active: usize) -> ChainTrace {
    let reference = complete_linkage_labels(sim, k_active.max(1));
    let kr = reference.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = trace.clone();
    for d in &mut out.draws {
        let k = d.k();
        let table = contingency(&d.c, &reference, k, kr.max(k));
        let matching = best_matching(&table, k <= EXHAUSTIVE_RELABEL_MAX_K);
        let mut perm = vec![usize::MAX; k];
        let mut taken = vec![false; k];
        for (h, m) in matching.iter().enumerate() {
            if let Some(r) = *m {
                if r < k {
                    perm[h] = r;
                    taken[r] = true;
                }
            }
        }
        let mut free = (0..k).filter(|&r| !taken[r]);
        for p in perm.iter_mut().filter(|p| **p == usize::MAX) {
            *p = free.next().expect("a free label remains");
        }
        d.permute(&perm, trace.n_subpops);
    }
    out
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

fn median_of(draws: &[Draw], len: usize, get: impl Fn(&Draw, usize) -> f64) -> Vec<f64> {
    let mut buf = vec![0.0; draws.len()];
    (0..len)
        .map(|e| {
            for (b, d) in buf.iter_mut().zip(draws) {
                *b = get(d, e);
            }
            median(&mut buf)
        })
        .collect()
}

fn renormalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

fn renormalize_tables(table: &mut [f64], levels: &[usize]) {
    let width: usize = levels.iter().sum();
    for row in table.chunks_mut(width) {
        let mut off = 0;
        for &d in levels {
            renormalize(&mut row[off..off + d]);
            off += d;
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub const DIC_VARIANT: &str = "observed-data: -4 mean(logL) + 2 logL(posterior median)";

/// Posterior medians and derived point estimates. Indices are zero-based;
/// the JSON export shifts labels and levels to one-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mode: Mode,
    pub k: usize,
    pub ks: Vec<usize>,
    pub levels: Vec<usize>,
    pub n_subpops: usize,
    pub pi_med: Vec<f64>,
    /// `K × Σd_j`.
    pub theta0_med: Vec<f64>,
    pub lambda_med: Vec<Vec<f64>>,
    pub theta1_med: Vec<Vec<f64>>,
    /// `S × p`.
    pub nu_med: Vec<f64>,
    pub beta_med: Vec<f64>,
    pub xi_med: Vec<f64>,
    pub delta_med: Vec<f64>,
    pub s0: f64,
    /// `n × K`.
    pub assign_prob_med: Vec<f64>,
    pub c_hat: Vec<usize>,
    /// `n × p`; empty without a local layer.
    pub l_hat: Vec<usize>,
    pub g_hat: Vec<bool>,
    /// `K × p` modal levels.
    pub modal_patterns: Vec<Vec<usize>>,
    /// `S × K × M`.
    pub outcome_prob: Vec<Vec<Vec<f64>>>,
    pub dic: f64,
}

impl PosteriorSummary {
    pub fn params(&self) -> Params<'_> {
        Params {
            pi: &self.pi_med,
            theta0: &self.theta0_med,
            lambda: &self.lambda_med,
            theta1: &self.theta1_med,
            xi: &self.xi_med,
            delta: &self.delta_med,
            s0: self.s0,
        }
    }

    /// Modal predicted outcome category of subject `i`.
    pub fn predicted_outcome(&self, data: &CategoricalDataset, i: usize) -> usize {
        argmax(&self.outcome_prob[data.subpop(i)][self.c_hat[i]])
    }
}

/// Element-wise medians of a relabelled trace, renormalised simplex blocks,
/// hard assignments, modal patterns, outcome probabilities and DIC.
pub fn summarize(trace: &ChainTrace, data: &CategoricalDataset) -> Result<PosteriorSummary> {
    let draws = &trace.draws;
    let first = draws
        .first()
        .ok_or_else(|| Error::InvalidState("summary of an empty trace".into()))?;
    let (n, p, s_count) = (data.n(), data.p(), data.n_subpops());
    if trace.n != n || trace.p != p {
        return Err(Error::Shape(format!(
            "trace is {}×{} but the dataset is {n}×{p}",
            trace.n, trace.p
        )));
    }
    let levels = data.levels().to_vec();
    let width: usize = levels.iter().sum();
    let k = first.k();

    let mut pi_med = median_of(draws, k, |d, e| d.pi[e]);
    renormalize(&mut pi_med);
    let mut theta0_med = median_of(draws, first.theta0.len(), |d, e| d.theta0[e]);
    renormalize_tables(&mut theta0_med, &levels);
    let mut lambda_med = Vec::new();
    let mut theta1_med = Vec::new();
    for s in 0..first.lambda.len() {
        let mut lam = median_of(draws, first.lambda[s].len(), |d, e| d.lambda[s][e]);
        renormalize(&mut lam);
        lambda_med.push(lam);
        let mut t = median_of(draws, first.theta1[s].len(), |d, e| d.theta1[s][e]);
        renormalize_tables(&mut t, &levels);
        theta1_med.push(t);
    }
    let nu_med = median_of(draws, first.nu.len(), |d, e| d.nu[e]);
    let beta_med = median_of(draws, first.beta.len(), |d, e| d.beta[e]);
    let xi_med = median_of(draws, first.xi.len(), |d, e| d.xi[e]);
    let mut delta_med = median_of(draws, first.delta.len(), |d, e| d.delta[e]);
    // Medians of ordered vectors are ordered; this only guards ties.
    for b in 1..delta_med.len() {
        if delta_med[b] <= delta_med[b - 1] {
            delta_med[b] = delta_med[b - 1] + 1e-9;
        }
    }
    let assign_prob_med = median_of(draws, first.assign_prob.len(), |d, e| d.assign_prob[e]);
    let c_hat: Vec<usize> = (0..n)
        .map(|i| argmax(&assign_prob_med[i * k..(i + 1) * k]))
        .collect();

    let layout = data.layout();
    let modal_patterns: Vec<Vec<usize>> = (0..k)
        .map(|h| {
            (0..p)
                .map(|j| argmax(&theta0_med[h * width + layout.offset(j)..][..levels[j]]))
                .collect()
        })
        .collect();
    let g_hat = if trace.mode == Mode::OsRpc {
        trace.g_hat()
    } else {
        vec![true; n * p]
    };
    let mut l_hat = Vec::new();
    if !lambda_med.is_empty() {
        l_hat = vec![0; n * p];
        for i in 0..n {
            let s = data.subpop(i);
            for j in 0..p {
                let idx = layout.index(j, data.x(i, j));
                let scores: Vec<f64> = lambda_med[s]
                    .iter()
                    .enumerate()
                    .map(|(l, w)| w * theta1_med[s][l * width + idx])
                    .collect();
                l_hat[i * p + j] = argmax(&scores);
            }
        }
    }
    let m = data.n_outcomes();
    let outcome_prob = (0..s_count)
        .map(|s| {
            (0..k)
                .map(|h| {
                    let mut out = vec![0.0; m];
                    category_probs(xi_med[s] + xi_med[s_count + h], &delta_med, trace.s0, &mut out);
                    out
                })
                .collect()
        })
        .collect();

    let mut summary = PosteriorSummary {
        mode: trace.mode,
        k,
        ks: lambda_med.iter().map(Vec::len).collect(),
        levels,
        n_subpops: s_count,
        pi_med,
        theta0_med,
        lambda_med,
        theta1_med,
        nu_med,
        beta_med,
        xi_med,
        delta_med,
        s0: trace.s0,
        assign_prob_med,
        c_hat,
        l_hat,
        g_hat,
        modal_patterns,
        outcome_prob,
        dic: f64::NAN,
    };
    summary.dic = compute_dic(trace, data, &summary)?;
    Ok(summary)
}

/// `-4 · mean(log L) + 2 · log L(plug-in)` with the joint observed-data
/// likelihood; the plug-in uses the posterior medians and `G_hat`.
pub fn compute_dic(trace: &ChainTrace, data: &CategoricalDataset, summary: &PosteriorSummary) -> Result<f64> {
    if trace.draws.is_empty() {
        return Err(Error::InvalidState("DIC of an empty trace".into()));
    }
    let mean = trace.draws.iter().map(|d| d.loglik).sum::<f64>() / trace.draws.len() as f64;
    let g = (trace.mode == Mode::OsRpc).then_some(summary.g_hat.as_slice());
    let plug_in = joint_loglik(&summary.params(), data, g);
    let dic = -4.0 * mean + 2.0 * plug_in;
    if !dic.is_finite() {
        return Err(Error::Domain(format!(
            "non-finite DIC (mean logL {mean}, plug-in {plug_in})"
        )));
    }
    Ok(dic)
}

/// Full post-processing of one chain: similarity, relabelling, summary.
pub fn analyze(trace: &ChainTrace, data: &CategoricalDataset, k_active: usize) -> Result<(ChainTrace, PosteriorSummary)> {
    let sim = build_similarity(trace)?;
    let relabeled = relabel_trace(trace, &sim, k_active);
    let summary = summarize(&relabeled, data)?;
    Ok((relabeled, summary))
}

/// Recovery metrics against a simulation truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub mode: Mode,
    pub k_pred: usize,
    pub dic: f64,
    pub p_y_mse: f64,
    /// Share of subjects whose modal predicted outcome category is not a
    /// modal category of their true outcome distribution.
    pub y_ord: f64,
    /// Per true pattern.
    pub pattern_classification: Vec<f64>,
    pub nu_mse: Option<f64>,
}

/// Largest K for which cluster↔pattern matching is exhaustive.
pub const EXHAUSTIVE_MATCH_MAX_K: usize = 8;

/// Per-pattern share of subjects whose predicted cluster maps to their true
/// pattern under the best one-to-one matching.
pub fn pattern_classification(c_hat: &[usize], true_c: &[usize], k: usize, n_patterns: usize) -> Vec<f64> {
    let table = contingency(c_hat, true_c, k, n_patterns);
    let matching = best_matching(&table, k <= EXHAUSTIVE_MATCH_MAX_K);
    let mut hits = vec![0usize; n_patterns];
    let mut sizes = vec![0usize; n_patterns];
    for (&h, &t) in c_hat.iter().zip(true_c) {
        sizes[t] += 1;
        if matching.get(h).copied().flatten() == Some(t) {
            hits[t] += 1;
        }
    }
    hits.iter()
        .zip(&sizes)
        .map(|(&h, &s)| if s == 0 { 0.0 } else { h as f64 / s as f64 })
        .collect()
}

pub fn evaluate(
    summary: &PosteriorSummary,
    truth: &SimulationTruth,
    data: &CategoricalDataset,
) -> Result<MetricBundle> {
    let (n, p, s_count) = (data.n(), data.p(), data.n_subpops());
    if truth.true_c.len() != n || summary.c_hat.len() != n {
        return Err(Error::Shape(format!(
            "truth has {} subjects, summary {}, dataset {n}",
            truth.true_c.len(),
            summary.c_hat.len()
        )));
    }
    if truth.true_g.len() != p || truth.true_g.iter().any(|r| r.len() != s_count) {
        return Err(Error::Shape("truth G is not variables × subpopulations".into()));
    }
    let m = data.n_outcomes();
    let mut sq = 0.0;
    let mut miss = 0usize;
    for i in 0..n {
        let s = data.subpop(i);
        let truth_probs = truth.outcome_probs(truth.true_c[i], s);
        if truth_probs.len() != m {
            return Err(Error::Shape(format!(
                "truth has {} outcome levels, data {m}",
                truth_probs.len()
            )));
        }
        let model = &summary.outcome_prob[s][summary.c_hat[i]];
        sq += model
            .iter()
            .zip(truth_probs.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        let top = truth_probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let predicted = summary.predicted_outcome(data, i);
        if (truth_probs[predicted] - top).abs() > 1e-12 {
            miss += 1;
        }
    }
    let nu_mse = (summary.mode == Mode::OsRpc).then(|| {
        let true_nu = truth.true_nu();
        let mut acc = 0.0;
        for s in 0..s_count {
            for j in 0..p {
                let diff = summary.nu_med[s * p + j] - true_nu[j][s];
                acc += diff * diff;
            }
        }
        acc / (s_count * p) as f64
    });
    Ok(MetricBundle {
        mode: summary.mode,
        k_pred: summary.k,
        dic: summary.dic,
        p_y_mse: sq / (n * m) as f64,
        y_ord: miss as f64 / n as f64,
        pattern_classification: pattern_classification(
            &summary.c_hat,
            &truth.true_c,
            summary.k,
            truth.n_patterns(),
        ),
        nu_mse,
    })
}

#[derive(Serialize)]
struct SummaryExport<'a> {
    mode: Mode,
    k: usize,
    ks: &'a [usize],
    dic: f64,
    dic_variant: &'static str,
    pi_med: &'a [f64],
    theta0_med: Vec<Vec<Vec<f64>>>,
    nu_med: Vec<Vec<f64>>,
    beta_med: &'a [f64],
    xi_med: &'a [f64],
    delta_med: &'a [f64],
    outcome_prob: &'a [Vec<Vec<f64>>],
    c_hat: Vec<usize>,
    modal_patterns: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<&'a MetricBundle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y_ord_definition: Option<&'static str>,
}

pub const Y_ORD_DEFINITION: &str =
    "interpretation: share of subjects whose modal predicted outcome category is not a modal true category";

/// JSON summary with one-based cluster labels and levels.
pub fn write_summary_json(summary: &PosteriorSummary, metrics: Option<&MetricBundle>, path: &Path) -> Result<()> {
    let width: usize = summary.levels.iter().sum();
    let p = summary.levels.len();
    let theta0_med = (0..summary.k)
        .map(|h| {
            let row = &summary.theta0_med[h * width..(h + 1) * width];
            let mut off = 0;
            summary
                .levels
                .iter()
                .map(|&d| {
                    let v = row[off..off + d].to_vec();
                    off += d;
                    v
                })
                .collect()
        })
        .collect();
    let export = SummaryExport {
        mode: summary.mode,
        k: summary.k,
        ks: &summary.ks,
        dic: summary.dic,
        dic_variant: DIC_VARIANT,
        pi_med: &summary.pi_med,
        theta0_med,
        nu_med: summary.nu_med.chunks(p.max(1)).map(<[f64]>::to_vec).collect(),
        beta_med: &summary.beta_med,
        xi_med: &summary.xi_med,
        delta_med: &summary.delta_med,
        outcome_prob: &summary.outcome_prob,
        c_hat: summary.c_hat.iter().map(|c| c + 1).collect(),
        modal_patterns: summary
            .modal_patterns
            .iter()
            .map(|row| row.iter().map(|r| r + 1).collect())
            .collect(),
        metrics,
        y_ord_definition: metrics.map(|_| Y_ORD_DEFINITION),
    };
    let text = serde_json::to_string_pretty(&export)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Rows are variables, columns clusters; entries are one-based levels.
pub fn write_modal_patterns_csv(summary: &PosteriorSummary, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut header = vec!["variable".to_string()];
    header.extend((1..=summary.k).map(|h| format!("cluster{h}")));
    w.write_record(&header)?;
    for j in 0..summary.levels.len() {
        let mut row = vec![(j + 1).to_string()];
        row.extend(summary.modal_patterns.iter().map(|pat| (pat[j] + 1).to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rows are variables, columns subpopulations; entries are median ν.
pub fn write_nu_heatmap_csv(summary: &PosteriorSummary, path: &Path) -> Result<()> {
    let p = summary.levels.len();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut header = vec!["variable".to_string()];
    header.extend((1..=summary.n_subpops).map(|s| format!("subpop{s}")));
    w.write_record(&header)?;
    for j in 0..p {
        let mut row = vec![(j + 1).to_string()];
        row.extend((0..summary.n_subpops).map(|s| summary.nu_med[s * p + j].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}
