//! Categorical exposure data, CSV ingestion and the cell-means design
//! matrix used by the probit regression.
//!
//! In memory every index is zero-based: level codes run `0..d_j`,
//! subpopulations `0..S`, outcomes `0..M`, clusters `0..K`. Files on disk
//! use one-based codes; conversion happens only at the IO boundary.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offsets of each variable's block in a flat `Σ d_j` level table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelLayout {
    offsets: Vec<usize>,
    levels: Vec<usize>,
    total: usize,
}

impl LevelLayout {
    pub fn new(levels: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(levels.len());
        let mut total = 0;
        for &d in levels {
            offsets.push(total);
            total += d;
        }
        Self {
            offsets,
            levels: levels.to_vec(),
            total,
        }
    }

    #[inline]
    pub fn index(&self, j: usize, r: usize) -> usize {
        self.offsets[j] + r
    }

    #[inline]
    pub fn offset(&self, j: usize) -> usize {
        self.offsets[j]
    }

    #[inline]
    pub fn levels(&self, j: usize) -> usize {
        self.levels[j]
    }

    pub fn all_levels(&self) -> &[usize] {
        &self.levels
    }

    /// Width of one flat table row.
    #[inline]
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn n_vars(&self) -> usize {
        self.levels.len()
    }

    pub fn range(&self, j: usize) -> std::ops::Range<usize> {
        self.offsets[j]..self.offsets[j] + self.levels[j]
    }
}

/// `n` subjects by `p` categorical exposures, with subpopulation labels and
/// an ordinal outcome. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalDataset {
    x: Vec<u8>,
    n: usize,
    p: usize,
    layout: LevelLayout,
    subpop: Vec<usize>,
    outcome: Vec<usize>,
    n_subpops: usize,
    n_outcomes: usize,
    subject_ids: Vec<String>,
}

impl CategoricalDataset {
    /// Build and validate a dataset from zero-based codes. `x` is row-major
    /// `n × p`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        x: Vec<u8>,
        n: usize,
        p: usize,
        levels: Vec<usize>,
        subpop: Vec<usize>,
        outcome: Vec<usize>,
        n_subpops: usize,
        n_outcomes: usize,
        subject_ids: Option<Vec<String>>,
    ) -> Result<Self> {
        if x.len() != n * p {
            return Err(Error::Shape(format!(
                "exposure matrix has {} cells, expected {n}x{p}",
                x.len()
            )));
        }
        if levels.len() != p {
            return Err(Error::Shape(format!(
                "{} level counts for {p} variables",
                levels.len()
            )));
        }
        if subpop.len() != n || outcome.len() != n {
            return Err(Error::Shape("subpopulation/outcome length differs from n".into()));
        }
        if let Some(j) = levels.iter().position(|&d| !(2..=255).contains(&d)) {
            return Err(Error::InvalidParameter(format!(
                "variable {} has {} levels; need 2..=255",
                j + 1,
                levels[j]
            )));
        }
        if n_outcomes < 2 {
            return Err(Error::InvalidParameter(format!(
                "ordinal outcome needs at least 2 levels, got {n_outcomes}"
            )));
        }
        if n_subpops == 0 {
            return Err(Error::InvalidParameter("need at least one subpopulation".into()));
        }
        for i in 0..n {
            for j in 0..p {
                if x[i * p + j] as usize >= levels[j] {
                    return Err(Error::InvalidParameter(format!(
                        "subject {} variable {} has level {} outside 1..={}",
                        i + 1,
                        j + 1,
                        x[i * p + j] as usize + 1,
                        levels[j]
                    )));
                }
            }
            if subpop[i] >= n_subpops {
                return Err(Error::InvalidParameter(format!(
                    "subject {} in unknown subpopulation {}",
                    i + 1,
                    subpop[i] + 1
                )));
            }
            if outcome[i] >= n_outcomes {
                return Err(Error::InvalidParameter(format!(
                    "subject {} outcome {} outside 1..={n_outcomes}",
                    i + 1,
                    outcome[i] + 1
                )));
            }
        }
        let mut seen = vec![false; n_subpops];
        subpop.iter().for_each(|&s| seen[s] = true);
        if let Some(s) = seen.iter().position(|&b| !b) {
            return Err(Error::InvalidParameter(format!(
                "subpopulation {} has no subjects",
                s + 1
            )));
        }
        let subject_ids =
            subject_ids.unwrap_or_else(|| (1..=n).map(|i| i.to_string()).collect::<Vec<_>>());
        if subject_ids.len() != n {
            return Err(Error::Shape("subject id count differs from n".into()));
        }
        let layout = LevelLayout::new(&levels);
        Ok(Self {
            x,
            n,
            p,
            layout,
            subpop,
            outcome,
            n_subpops,
            n_outcomes,
            subject_ids,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn x(&self, i: usize, j: usize) -> usize {
        self.x[i * self.p + j] as usize
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn levels(&self) -> &[usize] {
        self.layout.all_levels()
    }

    pub fn layout(&self) -> &LevelLayout {
        &self.layout
    }

    #[inline]
    pub fn subpop(&self, i: usize) -> usize {
        self.subpop[i]
    }

    pub fn subpops(&self) -> &[usize] {
        &self.subpop
    }

    #[inline]
    pub fn outcome(&self, i: usize) -> usize {
        self.outcome[i]
    }

    pub fn outcomes(&self) -> &[usize] {
        &self.outcome
    }

    pub fn n_subpops(&self) -> usize {
        self.n_subpops
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn subpop_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_subpops];
        self.subpop.iter().for_each(|&s| sizes[s] += 1);
        sizes
    }

    /// Write the dataset as `id,subpop,outcome,v1..vp` with one-based codes.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["id".to_string(), "subpop".into(), "outcome".into()];
        header.extend((1..=self.p).map(|j| format!("v{j}")));
        w.write_record(&header)?;
        for i in 0..self.n {
            let mut rec = Vec::with_capacity(self.p + 3);
            rec.push(self.subject_ids[i].clone());
            rec.push((self.subpop[i] + 1).to_string());
            rec.push((self.outcome[i] + 1).to_string());
            rec.extend(self.row(i).iter().map(|&v| (v as usize + 1).to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Which CSV columns hold what. Defaults match the `id,subpop,outcome,v*`
/// layout; `exposures = None` takes every remaining column in file order.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub id: String,
    pub subpop: String,
    pub outcome: String,
    pub exposures: Option<Vec<String>>,
    /// Per-variable level counts; inferred from the data when absent.
    pub levels: Option<Vec<usize>>,
    pub n_subpops: Option<usize>,
    pub n_outcomes: Option<usize>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            id: "id".into(),
            subpop: "subpop".into(),
            outcome: "outcome".into(),
            exposures: None,
            levels: None,
            n_subpops: None,
            n_outcomes: None,
        }
    }
}

/// Read a dataset from CSV. Codes are one-based integers; blank cells are
/// errors. Row numbers in errors are file line numbers.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<CategoricalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                row: 0,
                column: String::new(),
                message: format!("{other:?}"),
            },
        })?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            row: 1,
            column: name.to_string(),
            message: "column missing from header".into(),
        })
    };
    let id_col = find(&schema.id)?;
    let s_col = find(&schema.subpop)?;
    let y_col = find(&schema.outcome)?;
    let x_cols: Vec<usize> = match &schema.exposures {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|c| ![id_col, s_col, y_col].contains(c))
            .collect(),
    };
    if x_cols.is_empty() {
        return Err(Error::Parse {
            row: 1,
            column: String::new(),
            message: "no exposure columns".into(),
        });
    }
    let p = x_cols.len();
    if let Some(levels) = &schema.levels {
        if levels.len() != p {
            return Err(Error::Config(format!(
                "schema lists {} level counts for {p} exposure columns",
                levels.len()
            )));
        }
    }

    let parse_code = |raw: &str, line: usize, col: usize, max: Option<usize>| -> Result<usize> {
        let err = |message: String| Error::Parse {
            row: line,
            column: headers.get(col).unwrap_or("").to_string(),
            message,
        };
        if raw.is_empty() {
            return Err(err("missing value".into()));
        }
        let v: usize = raw
            .parse()
            .map_err(|_| err(format!("'{raw}' is not a positive integer code")))?;
        if v == 0 {
            return Err(err("code 0 is out of range (codes start at 1)".into()));
        }
        if let Some(max) = max {
            if v > max {
                return Err(err(format!("code {v} exceeds maximum {max}")));
            }
        }
        Ok(v - 1)
    };

    let mut ids = Vec::new();
    let mut subpop = Vec::new();
    let mut outcome = Vec::new();
    let mut x: Vec<u8> = Vec::new();
    let mut max_code = vec![0usize; p];
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let cell = |c: usize| rec.get(c).unwrap_or("");
        ids.push(cell(id_col).to_string());
        subpop.push(parse_code(cell(s_col), line, s_col, schema.n_subpops)?);
        outcome.push(parse_code(cell(y_col), line, y_col, schema.n_outcomes)?);
        for (j, &c) in x_cols.iter().enumerate() {
            let max = schema.levels.as_ref().map(|l| l[j]).or(Some(255));
            let v = parse_code(cell(c), line, c, max)?;
            max_code[j] = max_code[j].max(v + 1);
            x.push(v as u8);
        }
    }
    let n = ids.len();
    if n == 0 {
        return Err(Error::Parse {
            row: 2,
            column: String::new(),
            message: "file has no data rows".into(),
        });
    }
    let levels = schema
        .levels
        .clone()
        .unwrap_or_else(|| max_code.iter().map(|&m| m.max(2)).collect());
    let n_subpops = schema
        .n_subpops
        .unwrap_or_else(|| subpop.iter().max().map_or(0, |m| m + 1));
    let n_outcomes = schema
        .n_outcomes
        .unwrap_or_else(|| outcome.iter().max().map_or(0, |m| m + 1).max(2));
    CategoricalDataset::new(
        x,
        n,
        p,
        levels,
        subpop,
        outcome,
        n_subpops,
        n_outcomes,
        Some(ids),
    )
}

/// Dense `n × q` regression design. For the cell-means coding built by
/// [`build_design_matrix`] the first `g` columns are covariates (one per
/// subpopulation) and the last `k` columns indicate the global cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    n: usize,
    q: usize,
    g: usize,
    data: Vec<f64>,
    column_labels: Vec<String>,
}

impl DesignMatrix {
    /// Arbitrary dense design whose last `q - g` columns are cluster
    /// indicators.
    pub fn from_dense(n: usize, q: usize, g: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * q || g > q {
            return Err(Error::Shape(format!(
                "design data has {} cells for {n}x{q} (g = {g})",
                data.len()
            )));
        }
        let column_labels = (0..q)
            .map(|c| {
                if c < g {
                    format!("w{}", c + 1)
                } else {
                    format!("cluster{}", c - g + 1)
                }
            })
            .collect();
        Ok(Self {
            n,
            q,
            g,
            data,
            column_labels,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of non-cluster columns.
    pub fn n_covariates(&self) -> usize {
        self.g
    }

    pub fn n_clusters(&self) -> usize {
        self.q - self.g
    }

    pub fn column_labels(&self) -> &[String] {
        &self.column_labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.data[i * self.q + c]
    }

    pub fn row_dot(&self, i: usize, xi: &[f64]) -> f64 {
        self.row(i)
            .iter()
            .zip(xi)
            .filter(|(w, _)| **w != 0.0)
            .map(|(w, b)| w * b)
            .sum()
    }

    /// Linear predictor from the covariate block only.
    pub fn covariate_dot(&self, i: usize, xi: &[f64]) -> f64 {
        self.row(i)[..self.g]
            .iter()
            .zip(xi)
            .filter(|(w, _)| **w != 0.0)
            .map(|(w, b)| w * b)
            .sum()
    }

    /// `W'W`.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.q, self.q);
        let mut nz: Vec<(usize, f64)> = Vec::with_capacity(self.q);
        for i in 0..self.n {
            nz.clear();
            nz.extend(
                self.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(c, w)| (c, *w)),
            );
            for &(a, wa) in &nz {
                for &(b, wb) in &nz {
                    out[(a, b)] += wa * wb;
                }
            }
        }
        out
    }

    /// `W'v`.
    pub fn t_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.q];
        for i in 0..self.n {
            for (c, w) in self.row(i).iter().enumerate() {
                if *w != 0.0 {
                    out[c] += w * v[i];
                }
            }
        }
        out
    }
}

/// Cell-means design: `[subpopulation one-hot | cluster one-hot]`, no
/// intercept. `clusters` are zero-based and must be `< k`.
pub fn build_design_matrix(
    dataset: &CategoricalDataset,
    clusters: &[usize],
    k: usize,
) -> Result<DesignMatrix> {
    if k == 0 {
        return Err(Error::InvalidState("design matrix needs K >= 1 clusters".into()));
    }
    if clusters.len() != dataset.n() {
        return Err(Error::Shape(format!(
            "{} cluster labels for {} subjects",
            clusters.len(),
            dataset.n()
        )));
    }
    let g = dataset.n_subpops();
    let q = g + k;
    let n = dataset.n();
    let mut data = vec![0.0; n * q];
    for i in 0..n {
        if clusters[i] >= k {
            return Err(Error::InvalidState(format!(
                "subject {} assigned to cluster {} but K = {k}",
                i + 1,
                clusters[i] + 1
            )));
        }
        data[i * q + dataset.subpop(i)] = 1.0;
        data[i * q + g + clusters[i]] = 1.0;
    }
    let mut column_labels: Vec<String> = (1..=g).map(|s| format!("subpop{s}")).collect();
    column_labels.extend((1..=k).map(|h| format!("cluster{h}")));
    Ok(DesignMatrix {
        n,
        q,
        g,
        data,
        column_labels,
    })
}

/// Per-value cache key helper for linear predictors that repeat across
/// subjects (cell-means designs produce only `S` distinct covariate sums).
pub(crate) fn predictor_cache_key(v: f64, y: usize) -> (u64, usize) {
    (v.to_bits(), y)
}

pub(crate) type PredictorCache = HashMap<(u64, usize), Vec<f64>>;
