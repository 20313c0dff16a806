//! Data-augmented ordinal probit regression.
//!
//! Each subject carries a latent `z_i ~ N(W_i ξ, s0²)` and the outcome is
//! the interval of the ordered boundaries `-∞ < δ_1 < … < δ_{M-1} < ∞` that
//! contains `z_i`. Given the allocations, a sweep draws `z`, then `ξ` from
//! its conjugate normal, then each boundary from its uniform-on-Φ-scale
//! conditional.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::stats::{
    cholesky, normal_cdf, normal_interval_prob, normal_quantile, sample_truncnorm,
    standard_normal, TruncationBounds,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbitState {
    pub z: Vec<f64>,
    pub xi: Vec<f64>,
    /// Finite interior boundaries, strictly increasing, length `M - 1`.
    pub delta: Vec<f64>,
    pub s0: f64,
}

impl ProbitState {
    pub fn n_outcomes(&self) -> usize {
        self.delta.len() + 1
    }

    /// Open interval of the latent scale belonging to outcome `y`.
    pub fn interval(&self, y: usize) -> (f64, f64) {
        interval(&self.delta, y)
    }
}

pub(crate) fn interval(delta: &[f64], y: usize) -> (f64, f64) {
    let lo = if y == 0 { f64::NEG_INFINITY } else { delta[y - 1] };
    let hi = if y == delta.len() { f64::INFINITY } else { delta[y] };
    (lo, hi)
}

/// Starting boundaries from the empirical outcome quantiles, shifted so
/// that `δ_1 = 0`.
pub fn initial_delta(y: &[usize], n_outcomes: usize) -> Vec<f64> {
    let n = y.len().max(1) as f64;
    let mut counts = vec![0usize; n_outcomes];
    y.iter().for_each(|&v| counts[v] += 1);
    let eps = 0.5 / n;
    let mut cum = 0usize;
    let mut q = Vec::with_capacity(n_outcomes - 1);
    for &c in &counts[..n_outcomes - 1] {
        cum += c;
        let f = (cum as f64 / n).clamp(eps, 1.0 - eps);
        q.push(normal_quantile(f).expect("clamped into (0, 1)"));
    }
    let shift = q[0];
    let mut delta: Vec<f64> = q.iter().map(|v| v - shift).collect();
    for b in 1..delta.len() {
        if delta[b] <= delta[b - 1] {
            delta[b] = delta[b - 1] + 1e-3;
        }
    }
    delta
}

/// `Pr(y = m | mean)` for every category.
pub fn category_probs(mean: f64, delta: &[f64], s0: f64, out: &mut [f64]) {
    for (m, o) in out.iter_mut().enumerate() {
        let (lo, hi) = interval(delta, m);
        *o = normal_interval_prob((lo - mean) / s0, (hi - mean) / s0);
    }
}

/// `ln Pr(y | mean)`.
pub fn log_category_prob(mean: f64, y: usize, delta: &[f64], s0: f64) -> f64 {
    let (lo, hi) = interval(delta, y);
    normal_interval_prob((lo - mean) / s0, (hi - mean) / s0).ln()
}

/// Latent draws `z_i` truncated to their outcome's interval.
pub fn draw_z<R: Rng + ?Sized>(
    probit: &mut ProbitState,
    design: &DesignMatrix,
    y: &[usize],
    rng: &mut R,
) -> Result<()> {
    if design.n() != y.len() || probit.z.len() != y.len() {
        return Err(Error::Shape("design rows, outcomes and z must agree".into()));
    }
    for i in 0..y.len() {
        let mean = design.row_dot(i, &probit.xi);
        let (lo, hi) = probit.interval(y[i]);
        let bounds = TruncationBounds { lower: lo, upper: hi };
        probit.z[i] =
            sample_truncnorm(mean, probit.s0, bounds, rng).map_err(|e| Error::Numerical {
                subject: i + 1,
                message: e.to_string(),
            })?;
    }
    Ok(())
}

/// `ξ ~ N(Q⁻¹ b, Q⁻¹)` with `Q = Σ0⁻¹ + W'W / s0²` and
/// `b = Σ0⁻¹ μ0 + W'z / s0²`.
pub fn update_xi<R: Rng + ?Sized>(
    probit: &mut ProbitState,
    design: &DesignMatrix,
    mu0: &[f64],
    sigma0: &DMatrix<f64>,
    rng: &mut R,
) -> Result<()> {
    let q = design.q();
    if mu0.len() != q || sigma0.nrows() != q {
        return Err(Error::Shape(format!(
            "prior has dimension {} but design has {q} columns",
            mu0.len()
        )));
    }
    let prior_precision = spd_inverse(sigma0)?;
    let inv_var = 1.0 / (probit.s0 * probit.s0);
    let precision = &prior_precision + design.gram() * inv_var;
    let wz = DVector::from_vec(design.t_mul(&probit.z));
    let rhs = &prior_precision * DVector::from_column_slice(mu0) + wz * inv_var;
    probit.xi = sample_from_precision(&precision, &rhs, rng)?;
    Ok(())
}

/// Draw from `N(P⁻¹ r, P⁻¹)` using the Cholesky factor of `P`.
pub(crate) fn sample_from_precision<R: Rng + ?Sized>(
    precision: &DMatrix<f64>,
    rhs: &DVector<f64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let l = cholesky(precision)?;
    let half = l
        .solve_lower_triangular(rhs)
        .ok_or(Error::NotPositiveDefinite { minor: 0 })?;
    let eps = DVector::from_fn(rhs.len(), |_, _| standard_normal(rng));
    let draw = l
        .tr_solve_lower_triangular(&(half + eps))
        .ok_or(Error::NotPositiveDefinite { minor: 0 })?;
    Ok(draw.as_slice().to_vec())
}

pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = cholesky(m)?;
    let n = m.nrows();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(Error::NotPositiveDefinite { minor: 0 })?;
    Ok(linv.transpose() * linv)
}

/// Outcome of one boundary sweep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeltaUpdate {
    /// Zero-based boundaries left unchanged because an adjacent outcome
    /// category was empty.
    pub skipped: Vec<usize>,
}

/// Boundary updates. For boundary `b` between categories `b` and `b + 1`,
/// with `c_lo = max(z | y = b)`, `c_hi = min(z | y = b + 1)` and
/// neighbours `δ_prev`, `δ_next`:
///
/// ```text
/// F(v)  = Φ(v / s0)
/// δ*    ~ U((F(c_lo) - F(δ_prev)) / (F(δ_next) - F(δ_prev)),
///           (F(c_hi) - F(δ_prev)) / (F(δ_next) - F(δ_prev)))
/// δ_b   = s0 Φ⁻¹(F(δ_prev) + δ* (F(δ_next) - F(δ_prev)))
/// ```
///
/// With three categories this is the δ1 update (`δ_prev = -∞`,
/// `δ_next = δ2`) followed by the δ2 update (`δ_prev = δ1`, `δ_next = ∞`).
pub fn update_delta<R: Rng + ?Sized>(
    probit: &mut ProbitState,
    y: &[usize],
    rng: &mut R,
) -> Result<DeltaUpdate> {
    let n_bounds = probit.delta.len();
    let mut lo_z = vec![f64::NEG_INFINITY; n_bounds + 1];
    let mut hi_z = vec![f64::INFINITY; n_bounds + 1];
    let mut seen = vec![false; n_bounds + 1];
    for (&z, &c) in probit.z.iter().zip(y) {
        seen[c] = true;
        lo_z[c] = lo_z[c].max(z);
        hi_z[c] = hi_z[c].min(z);
    }
    let s0 = probit.s0;
    let f = |v: f64| normal_cdf(v / s0);
    let mut out = DeltaUpdate::default();
    for b in 0..n_bounds {
        if !seen[b] || !seen[b + 1] {
            log::warn!("outcome category next to boundary {} is empty; skipping", b + 1);
            out.skipped.push(b);
            continue;
        }
        let prev = if b == 0 { f64::NEG_INFINITY } else { probit.delta[b - 1] };
        let next = if b + 1 == n_bounds { f64::INFINITY } else { probit.delta[b + 1] };
        let lo = lo_z[b].max(prev);
        let hi = hi_z[b + 1].min(next);
        if !(lo < hi) {
            return Err(Error::InvalidState(format!(
                "latent draws inconsistent with boundary {}: max {lo} >= min {hi}",
                b + 1
            )));
        }
        let (f_prev, f_next) = (f(prev), f(next));
        let mass = f_next - f_prev;
        let u_lo = (f(lo) - f_prev) / mass;
        let u_hi = (f(hi) - f_prev) / mass;
        let mut value = f64::NAN;
        if u_hi - u_lo > 1e-12 {
            let star = u_lo + rng.random::<f64>() * (u_hi - u_lo);
            let p = f_prev + star * mass;
            if p > 0.0 && p < 1.0 {
                value = s0 * normal_quantile(p)?;
            }
        }
        if !(value > lo && value < hi) {
            // Interval lost to rounding on the Φ scale: draw the same
            // conditional directly in the tail.
            value = sample_truncnorm(0.0, s0, TruncationBounds::new(lo, hi)?, rng)?;
        }
        probit.delta[b] = value;
    }
    Ok(out)
}

/// Per-subject outcome probabilities and the joint outcome log-likelihood.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeLikelihood {
    /// Row-major `n × M`.
    pub probs: Vec<f64>,
    pub n_outcomes: usize,
    pub loglik: f64,
}

impl OutcomeLikelihood {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.n_outcomes..(i + 1) * self.n_outcomes]
    }
}

/// `Pr(y_i = m) = Φ((δ_m - W_i ξ)/s0) - Φ((δ_{m-1} - W_i ξ)/s0)` for every
/// subject, and `Σ_i ln Pr(y_i)`.
pub fn outcome_likelihood(
    probit: &ProbitState,
    design: &DesignMatrix,
    y: &[usize],
) -> OutcomeLikelihood {
    let m = probit.n_outcomes();
    let mut probs = vec![0.0; design.n() * m];
    let mut loglik = 0.0;
    for i in 0..design.n() {
        let mean = design.row_dot(i, &probit.xi);
        let row = &mut probs[i * m..(i + 1) * m];
        category_probs(mean, &probit.delta, probit.s0, row);
        loglik += row[y[i]].ln();
    }
    OutcomeLikelihood {
        probs,
        n_outcomes: m,
        loglik,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::RngStream;

    fn ones_design(n: usize) -> DesignMatrix {
        DesignMatrix::from_dense(n, 1, 1, vec![1.0; n]).unwrap()
    }

    #[test]
    fn likelihood_at_zero_predictor() {
        let p = ProbitState {
            z: vec![0.0],
            xi: vec![0.0],
            delta: vec![0.0, 1.0],
            s0: 1.0,
        };
        let lik = outcome_likelihood(&p, &ones_design(1), &[0]);
        let row = lik.row(0);
        assert!((row[0] - 0.5).abs() < 1e-12);
        assert!((row[1] - 0.341344746).abs() < 1e-8);
        assert!((row[2] - 0.158655254).abs() < 1e-8);
        assert!((lik.loglik - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn likelihood_limit_large_predictor() {
        let mut out = [0.0; 3];
        category_probs(40.0, &[0.0, 1.0], 1.0, &mut out);
        assert!(out[0] < 1e-300 && out[1] < 1e-300);
        assert!((out[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn z_respects_middle_interval() {
        let mut rng = RngStream::new(4, 0);
        let n = 1000;
        let mut p = ProbitState {
            z: vec![0.5; n],
            xi: vec![3.0],
            delta: vec![0.0, 1.0],
            s0: 1.0,
        };
        draw_z(&mut p, &ones_design(n), &vec![1; n], &mut rng).unwrap();
        assert!(p.z.iter().all(|&z| z > 0.0 && z < 1.0));
    }

    #[test]
    fn z_negative_half_normal_mean() {
        let mut rng = RngStream::new(5, 0);
        let n = 100_000;
        let mut p = ProbitState {
            z: vec![-1.0; n],
            xi: vec![0.0],
            delta: vec![0.0, 1.0],
            s0: 1.0,
        };
        draw_z(&mut p, &ones_design(n), &vec![0; n], &mut rng).unwrap();
        let mean = p.z.iter().sum::<f64>() / n as f64;
        let expect = -(2.0 / std::f64::consts::PI).sqrt();
        assert!((mean - expect).abs() < 0.01, "{mean}");
    }

    #[test]
    fn binary_outcome_reduces_to_single_threshold() {
        let mut rng = RngStream::new(6, 0);
        let mut p = ProbitState {
            z: vec![-0.5, 0.5],
            xi: vec![0.0],
            delta: vec![0.0],
            s0: 1.0,
        };
        draw_z(&mut p, &ones_design(2), &[0, 1], &mut rng).unwrap();
        assert!(p.z[0] < 0.0 && p.z[1] > 0.0);
        let mut out = [0.0; 2];
        category_probs(0.3, &p.delta, 1.0, &mut out);
        assert!((out[0] - normal_cdf(-0.3)).abs() < 1e-15);
        assert!((out[0] + out[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn xi_without_data_is_prior() {
        let mut rng = RngStream::new(7, 0);
        let n = 5;
        let design = DesignMatrix::from_dense(n, 2, 1, vec![0.0; n * 2]).unwrap();
        let sigma0 = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let draws = 100_000;
        let mut p = ProbitState {
            z: vec![0.3; n],
            xi: vec![0.0; 2],
            delta: vec![0.0],
            s0: 1.0,
        };
        let (mut m0, mut m1, mut v0) = (0.0, 0.0, 0.0);
        for _ in 0..draws {
            update_xi(&mut p, &design, &[1.0, -1.0], &sigma0, &mut rng).unwrap();
            m0 += p.xi[0];
            m1 += p.xi[1];
            v0 += (p.xi[0] - 1.0).powi(2);
        }
        let d = draws as f64;
        assert!((m0 / d - 1.0).abs() < 0.015);
        assert!((m1 / d + 1.0).abs() < 0.015);
        assert!((v0 / d - 2.0).abs() < 0.04);
    }

    #[test]
    fn xi_scalar_conjugacy() {
        // q = 1, W = 1, Σ0 = 1, μ0 = 0 ⇒ posterior mean n z̄ / (1 + n).
        let mut rng = RngStream::new(8, 0);
        let z = vec![0.2, 1.1, -0.4, 0.9];
        let n = z.len() as f64;
        let zbar = z.iter().sum::<f64>() / n;
        let mut p = ProbitState {
            z,
            xi: vec![0.0],
            delta: vec![0.0],
            s0: 1.0,
        };
        let draws = 200_000;
        let sigma0 = DMatrix::identity(1, 1);
        let mean = (0..draws)
            .map(|_| {
                update_xi(&mut p, &ones_design(4), &[0.0], &sigma0, &mut rng).unwrap();
                p.xi[0]
            })
            .sum::<f64>()
            / draws as f64;
        assert!((mean - n * zbar / (1.0 + n)).abs() < 0.01);
    }

    #[test]
    fn delta_lands_between_order_statistics() {
        let mut rng = RngStream::new(9, 0);
        let y = [0, 0, 1, 1, 2];
        let mut p = ProbitState {
            z: vec![-1.0, -0.5, -0.1, 0.4, 1.5],
            xi: vec![0.0],
            delta: vec![-0.3, 1.0],
            s0: 1.0,
        };
        for _ in 0..10_000 {
            update_delta(&mut p, &y, &mut rng).unwrap();
            assert!(p.delta[0] > -0.5 && p.delta[0] < -0.1);
            assert!(p.delta[1] > 0.4 && p.delta[1] < 1.5);
        }
    }

    #[test]
    fn delta_skips_empty_category() {
        let mut rng = RngStream::new(10, 0);
        let mut p = ProbitState {
            z: vec![-1.0, 2.0],
            xi: vec![0.0],
            delta: vec![0.0, 1.0],
            s0: 1.0,
        };
        let upd = update_delta(&mut p, &[0, 2], &mut rng).unwrap();
        assert_eq!(upd.skipped, vec![0, 1]);
        assert_eq!(p.delta, vec![0.0, 1.0]);
    }

    #[test]
    fn delta_far_tail_falls_back() {
        let mut rng = RngStream::new(11, 0);
        let mut p = ProbitState {
            z: vec![9.0, 9.000001],
            xi: vec![0.0],
            delta: vec![9.0000005],
            s0: 1.0,
        };
        update_delta(&mut p, &[0, 1], &mut rng).unwrap();
        assert!(p.delta[0] > 9.0 && p.delta[0] < 9.000001);
    }

    #[test]
    fn initial_delta_starts_at_zero_and_increases() {
        let y = [0, 0, 1, 2, 2, 2, 2, 2];
        let d = initial_delta(&y, 3);
        assert_eq!(d[0], 0.0);
        assert!(d[1] > 0.0);
        // All mass in the top category still gives ordered boundaries.
        let d = initial_delta(&[2, 2, 2], 3);
        assert!(d[1] > d[0]);
    }
}
