//! Parameter state, hyperparameters and sampler settings.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{build_design_matrix, CategoricalDataset, DesignMatrix};
use crate::error::{Error, Result};
use crate::probit::{draw_z, initial_delta, ProbitState};
use crate::stats::ChainRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Global clusters plus subpopulation-specific local deviations.
    #[serde(rename = "osrpc")]
    OsRpc,
    /// Global clusters only (`G ≡ 1`).
    #[serde(rename = "oslcm")]
    OsLcm,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::OsRpc => "osRPC",
            Mode::OsLcm => "osLCM",
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Mode::OsRpc => "osrpc",
            Mode::OsLcm => "oslcm",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "osrpc" => Ok(Mode::OsRpc),
            "oslcm" => Ok(Mode::OsLcm),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    /// Dirichlet concentration for π and λ.
    pub alpha: f64,
    /// Dirichlet concentration for θ0 and θ1.
    pub eta: f64,
    pub a_beta: f64,
    pub b_beta: f64,
    /// Prior mean of every ξ coefficient.
    pub mu0: f64,
    /// Prior variance of every ξ coefficient (Σ0 = sigma0 · I).
    pub sigma0: f64,
    /// Latent probit scale.
    pub s0: f64,
    pub k0: usize,
    pub ks: usize,
    /// Starting value of every ν.
    pub nu_init: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            eta: 1.0,
            a_beta: 1.0,
            b_beta: 1.0,
            mu0: 0.0,
            sigma0: 1.0,
            s0: 1.0,
            k0: 50,
            ks: 50,
            nu_init: 0.5,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("eta", self.eta),
            ("a_beta", self.a_beta),
            ("b_beta", self.b_beta),
            ("sigma0", self.sigma0),
            ("s0", self.s0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.mu0.is_finite() {
            return Err(Error::Config("mu0 must be finite".into()));
        }
        if self.k0 == 0 || self.ks == 0 {
            return Err(Error::Config("k0 and ks must be at least 1".into()));
        }
        if !(self.nu_init > 0.0 && self.nu_init <= 1.0) {
            return Err(Error::Config("nu_init must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// `(μ0, Σ0)` for a design with `q` columns.
    pub fn xi_prior(&self, q: usize) -> (Vec<f64>, DMatrix<f64>) {
        (vec![self.mu0; q], DMatrix::identity(q, q) * self.sigma0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub adaptive_iters: usize,
    pub adaptive_burnin: usize,
    pub fixed_iters: usize,
    pub fixed_burnin: usize,
    pub thin: usize,
    pub nonempty_threshold: f64,
    /// Apply a random relabelling of the global clusters every this many
    /// fixed-phase iterations (0 disables).
    pub permute_every: usize,
    pub mode: Mode,
    pub seed: u64,
    /// Pin every ν to 1 (osRPC with the local block switched off).
    pub pin_nu_one: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            adaptive_iters: 10_000,
            adaptive_burnin: 5_000,
            fixed_iters: 25_000,
            fixed_burnin: 15_000,
            thin: 10,
            nonempty_threshold: 0.05,
            permute_every: 10,
            mode: Mode::OsRpc,
            seed: 0,
            pin_nu_one: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.adaptive_burnin >= self.adaptive_iters {
            return Err(Error::Config("adaptive burn-in must be below adaptive iterations".into()));
        }
        if self.fixed_burnin >= self.fixed_iters {
            return Err(Error::Config("fixed burn-in must be below fixed iterations".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if !(self.nonempty_threshold > 0.0 && self.nonempty_threshold < 1.0) {
            return Err(Error::Config("nonempty threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Number of draws the fixed phase retains.
    pub fn retained_draws(&self) -> usize {
        (self.fixed_iters - self.fixed_burnin) / self.thin
    }
}

/// Full parameter set of one chain. All indices are zero-based.
///
/// `theta0` is `K × Σd_j` row-major; `theta1[s]` is `Ks_s × Σd_j`. `l` and
/// `g` are `n × p` row-major. `assign_prob` holds the most recent
/// global-allocation probabilities, `n × K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub c: Vec<usize>,
    pub l: Vec<usize>,
    pub g: Vec<bool>,
    pub pi: Vec<f64>,
    pub lambda: Vec<Vec<f64>>,
    pub theta0: Vec<f64>,
    pub theta1: Vec<Vec<f64>>,
    /// `S × p` row-major.
    pub nu: Vec<f64>,
    pub beta: Vec<f64>,
    pub probit: ProbitState,
    pub assign_prob: Vec<f64>,
}

impl ModelState {
    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn ks(&self) -> Vec<usize> {
        self.lambda.iter().map(Vec::len).collect()
    }

    pub fn theta0_row(&self, k: usize, width: usize) -> &[f64] {
        &self.theta0[k * width..(k + 1) * width]
    }

    pub fn design(&self, data: &CategoricalDataset) -> Result<DesignMatrix> {
        build_design_matrix(data, &self.c, self.k())
    }

    pub fn occupancy(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k()];
        self.c.iter().for_each(|&c| counts[c] += 1);
        counts
    }

    /// Random starting state: uniform allocations, `G ~ Bern(nu_init)` (all
    /// ones for osLCM or when ν is pinned), flat weights, pattern tables
    /// drawn from their full conditionals given the random allocations, ξ
    /// at its prior mean and boundaries from the empirical outcome
    /// quantiles.
    pub fn initialize(
        data: &CategoricalDataset,
        hyper: &Hyperparameters,
        config: &SamplerConfig,
        rng: &mut ChainRng,
    ) -> Result<Self> {
        hyper.validate()?;
        let mode = config.mode;
        let pinned = config.pin_nu_one;
        let (n, p, s_count) = (data.n(), data.p(), data.n_subpops());
        let k = hyper.k0;
        let local = mode == Mode::OsRpc;
        let ks = if local { hyper.ks } else { 1 };
        let width = data.layout().total();

        let c: Vec<usize> = (0..n).map(|_| rng.global.random_range(0..k)).collect();
        let (l, g) = if local {
            let l = (0..n * p).map(|_| rng.local.random_range(0..ks)).collect();
            let g = (0..n * p)
                .map(|_| pinned || rng.local.random::<f64>() < hyper.nu_init)
                .collect();
            (l, g)
        } else {
            (vec![0; n * p], vec![true; n * p])
        };
        let nu_start = if local && !pinned { hyper.nu_init } else { 1.0 };
        let delta = initial_delta(data.outcomes(), data.n_outcomes());
        let mut state = ModelState {
            c,
            l,
            g,
            pi: vec![1.0 / k as f64; k],
            lambda: vec![vec![1.0 / ks as f64; ks]; s_count],
            theta0: vec![0.0; k * width],
            theta1: vec![vec![0.0; ks * width]; s_count],
            nu: vec![nu_start; s_count * p],
            beta: vec![1.0; s_count],
            probit: ProbitState {
                z: vec![0.0; n],
                xi: vec![hyper.mu0; s_count + k],
                delta,
                s0: hyper.s0,
            },
            assign_prob: vec![1.0 / k as f64; n * k],
        };
        crate::gibbs::update_theta0(&mut state, data, hyper, &mut rng.global)?;
        if local {
            crate::gibbs::update_theta1(&mut state, data, hyper, &mut rng.local)?;
        } else {
            state.theta1 = Vec::new();
            state.lambda = Vec::new();
            state.l = Vec::new();
        }
        let design = state.design(data)?;
        draw_z(&mut state.probit, &design, data.outcomes(), &mut rng.global)?;
        Ok(state)
    }

    /// Check simplex and range invariants within `tol`.
    pub fn check_invariants(&self, width_levels: &[usize], tol: f64) -> Result<()> {
        let simplex = |v: &[f64], what: &str| -> Result<()> {
            let sum: f64 = v.iter().sum();
            if (sum - 1.0).abs() > tol || v.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::InvalidState(format!("{what} is not a simplex (sum {sum})")));
            }
            Ok(())
        };
        simplex(&self.pi, "pi")?;
        for lam in &self.lambda {
            simplex(lam, "lambda")?;
        }
        let width: usize = width_levels.iter().sum();
        let check_table = |table: &[f64], what: &str| -> Result<()> {
            for row in table.chunks(width) {
                let mut off = 0;
                for &d in width_levels {
                    simplex(&row[off..off + d], what)?;
                    off += d;
                }
            }
            Ok(())
        };
        check_table(&self.theta0, "theta0")?;
        for t in &self.theta1 {
            check_table(t, "theta1")?;
        }
        if self.nu.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidState("nu outside [0, 1]".into()));
        }
        if self.beta.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::InvalidState("beta not positive".into()));
        }
        if self.probit.delta.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidState("boundaries not increasing".into()));
        }
        Ok(())
    }
}
