//! Observed-data log-likelihood of the joint model, conditional on the
//! global/local indicators:
//!
//! ```text
//! L_i = [ Σ_k π_k Π_{j:G_ij=1} θ0[k, j, x_ij] · Pr(y_i | s_i, k) ]
//!       · Π_{j:G_ij=0} Σ_l λ_l^(s_i) θ1^(s_i)[l, j, x_ij]
//! ```
//!
//! with the cell-means predictor `W_i ξ = ξ[s_i] + ξ[S + k]`.

use crate::data::CategoricalDataset;
use crate::model::ModelState;
use crate::probit::log_category_prob;
use crate::stats::log_sum_exp;

/// Borrowed view of the parameters the likelihood needs.
#[derive(Clone, Copy, Debug)]
pub struct Params<'a> {
    pub pi: &'a [f64],
    pub theta0: &'a [f64],
    pub lambda: &'a [Vec<f64>],
    pub theta1: &'a [Vec<f64>],
    pub xi: &'a [f64],
    pub delta: &'a [f64],
    pub s0: f64,
}

impl<'a> Params<'a> {
    pub fn of(state: &'a ModelState) -> Self {
        Self {
            pi: &state.pi,
            theta0: &state.theta0,
            lambda: &state.lambda,
            theta1: &state.theta1,
            xi: &state.probit.xi,
            delta: &state.probit.delta,
            s0: state.probit.s0,
        }
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }
}

/// Joint log-likelihood. `g = None` treats every variable as global.
pub fn joint_loglik(params: &Params<'_>, data: &CategoricalDataset, g: Option<&[bool]>) -> f64 {
    (0..data.n())
        .map(|i| subject_loglik(params, data, g, i))
        .sum()
}

pub fn subject_loglik(
    params: &Params<'_>,
    data: &CategoricalDataset,
    g: Option<&[bool]>,
    i: usize,
) -> f64 {
    let (p, k) = (data.p(), params.k());
    let layout = data.layout();
    let width = layout.total();
    let s = data.subpop(i);
    let n_subpops = data.n_subpops();
    let y = data.outcome(i);
    let is_global = |j: usize| g.is_none_or(|g| g[i * p + j]);

    let mut terms = Vec::with_capacity(k);
    for h in 0..k {
        let mean = params.xi[s] + params.xi[n_subpops + h];
        let mut t = params.pi[h].ln() + log_category_prob(mean, y, params.delta, params.s0);
        let row = &params.theta0[h * width..(h + 1) * width];
        for j in 0..p {
            if is_global(j) {
                t += row[layout.index(j, data.x(i, j))].ln();
            }
        }
        terms.push(t);
    }
    let mut total = log_sum_exp(&terms);

    for j in 0..p {
        if !is_global(j) {
            let idx = layout.index(j, data.x(i, j));
            let lam = &params.lambda[s];
            let theta1 = &params.theta1[s];
            let mix: f64 = lam
                .iter()
                .enumerate()
                .map(|(l, w)| w * theta1[l * width + idx])
                .sum();
            total += mix.ln();
        }
    }
    total
}
