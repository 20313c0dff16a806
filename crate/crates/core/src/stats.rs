//! Seedable random streams and the handful of distributions the sampler
//! needs: Gamma, Beta, Dirichlet, categorical, truncated normal and
//! multivariate normal, plus the standard normal CDF and quantile.

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A deterministic random stream identified by `(seed, stream_id)`.
///
/// Two streams built from the same pair produce bitwise-identical
/// sequences; different stream ids give statistically independent
/// sequences under the same seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Stream-id counter scheme. All randomness in a study derives from one
/// root seed; the stream id encodes which replicate, chain and role a
/// stream belongs to:
///
/// ```text
/// bits 63..32  replicate index
/// bits 31..8   chain index
/// bits  7..0   role
/// ```
pub mod stream {
    pub const ROLE_SIMULATE: u64 = 0;
    pub const ROLE_GLOBAL: u64 = 1;
    pub const ROLE_LOCAL: u64 = 2;

    pub fn id(replicate: u64, chain: u64, role: u64) -> u64 {
        (replicate << 32) | ((chain & 0xff_ffff) << 8) | (role & 0xff)
    }
}

/// Random streams owned by one chain. Global-pattern and probit updates
/// draw from `global`; the local block (G, L, λ, θ1, ν, β) draws from
/// `local`, so switching the local block off leaves the global sequence
/// untouched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRng {
    pub global: RngStream,
    pub local: RngStream,
}

impl ChainRng {
    pub fn new(seed: u64, replicate: u64, chain: u64) -> Self {
        Self {
            global: RngStream::new(seed, stream::id(replicate, chain, stream::ROLE_GLOBAL)),
            local: RngStream::new(seed, stream::id(replicate, chain, stream::ROLE_LOCAL)),
        }
    }
}

/// Truncation interval for a normal draw. Either side may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationBounds {
    pub lower: f64,
    pub upper: f64,
}

impl TruncationBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || !(lower < upper) {
            return Err(Error::InvalidParameter(format!(
                "truncation bounds must satisfy lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }
}

// ---------------------------------------------------------------------------
// Normal distribution functions
// ---------------------------------------------------------------------------

/// Standard normal CDF, via the fdlibm `erfc`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal survival function `1 - Φ(x)`, accurate in the upper tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `Φ(b) - Φ(a)` computed on whichever tail keeps precision.
pub fn normal_interval_prob(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        normal_sf(a) - normal_sf(b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

pub fn ln_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Standard normal quantile `Φ⁻¹(p)` for `p` in (0, 1).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile requires p in (0, 1), got {p}"
        )));
    }
    Ok(quantile_unchecked(p))
}

/// Quantile of the upper tail: the `x` with `1 - Φ(x) = q`. Keeps full
/// precision for small `q`, where `normal_quantile(1 - q)` cannot.
pub fn normal_quantile_upper(q: f64) -> Result<f64> {
    normal_quantile(q).map(|x| -x)
}

// Wichura (1988), algorithm AS 241 (PPND16).
#[allow(clippy::excessive_precision)]
fn quantile_unchecked(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r
                + 67265.770927008700853)
                * r
                + 45921.953931549871457)
                * r
                + 13731.693765509461125)
                * r
                + 1971.5909503065514427)
                * r
                + 133.14166789178437745)
                * r
                + 3.387132872796366608)
            / (((((((r * 5226.495278852545925 + 28729.085735721942674) * r
                + 39307.89580009271061)
                * r
                + 21213.794301586595867)
                * r
                + 5394.1960214247511077)
                * r
                + 687.1870074920579083)
                * r
                + 42.313330701600911252)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734)
            / (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r
                + 0.0151986665636164571966)
                * r
                + 0.14810397642748007459)
                * r
                + 0.68976733498510000455)
                * r
                + 1.6763848301838038494)
                * r
                + 2.05319162663775882187)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772)
            / (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r
                + 1.8463183175100546818e-5)
                * r
                + 7.868691311456132591e-4)
                * r
                + 0.0148753612908506148525)
                * r
                + 0.13692988092273580531)
                * r
                + 0.59983220655588793769)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

/// Gamma draw with the given shape and *rate*.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma requires positive finite shape and rate, got ({shape}, {rate})"
        )));
    }
    let dist = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::InvalidParameter(format!("gamma({shape}, {rate}): {e}")))?;
    Ok(dist.sample(rng))
}

pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "beta requires positive finite parameters, got ({a}, {b})"
        )));
    }
    let dist =
        Beta::new(a, b).map_err(|e| Error::InvalidParameter(format!("beta({a}, {b}): {e}")))?;
    Ok(dist.sample(rng))
}

/// Dirichlet draw by normalising independent Gamma variates.
///
/// When any concentration is below one the Gammas are drawn on the log
/// scale (`ln G(a) = ln G(a + 1) + ln U / a`) so that empty clusters with
/// tiny concentrations do not underflow to an all-zero vector.
pub fn sample_dirichlet<R: Rng + ?Sized>(concentration: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut out = vec![0.0; concentration.len()];
    sample_dirichlet_into(concentration, &mut out, rng)?;
    Ok(out)
}

pub fn sample_dirichlet_into<R: Rng + ?Sized>(
    concentration: &[f64],
    out: &mut [f64],
    rng: &mut R,
) -> Result<()> {
    if concentration.is_empty() {
        return Err(Error::InvalidParameter(
            "dirichlet needs at least one component".into(),
        ));
    }
    if let Some(a) = concentration.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "dirichlet concentration must be positive, got {a}"
        )));
    }
    debug_assert_eq!(concentration.len(), out.len());
    if concentration.len() == 1 {
        out[0] = 1.0;
        return Ok(());
    }
    if concentration.iter().all(|&a| a >= 1.0) {
        let mut total = 0.0;
        for (o, &a) in out.iter_mut().zip(concentration) {
            *o = Gamma::new(a, 1.0).expect("validated").sample(rng);
            total += *o;
        }
        if total > 0.0 && total.is_finite() {
            out.iter_mut().for_each(|o| *o /= total);
            return Ok(());
        }
    }
    // Log-scale route.
    let mut max = f64::NEG_INFINITY;
    for (o, &a) in out.iter_mut().zip(concentration) {
        let g: f64 = Gamma::new(a + 1.0, 1.0).expect("validated").sample(rng);
        let u: f64 = loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                break u;
            }
        };
        *o = g.ln() + u.ln() / a;
        max = max.max(*o);
    }
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(())
}

/// Index drawn with probability proportional to the non-negative `weights`.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return None;
    }
    let mut target = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if target < w {
            return Some(k);
        }
        target -= w;
    }
    // Rounding fell off the end: return the last positive weight.
    weights.iter().rposition(|&w| w > 0.0)
}

/// Normalise log-weights in place into probabilities (max-subtraction).
/// Returns `None` when every weight is `-inf` or any is NaN.
pub fn normalize_log_weights(log_w: &mut [f64]) -> Option<()> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() || log_w.iter().any(|w| w.is_nan()) {
        return None;
    }
    let mut total = 0.0;
    for w in log_w.iter_mut() {
        *w = (*w - max).exp();
        total += *w;
    }
    log_w.iter_mut().for_each(|w| *w /= total);
    Some(())
}

/// `ln Σ exp(v)`, returning `-inf` for an all `-inf` input.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

const TAIL_THRESHOLD: f64 = 4.0;
const MIN_INTERVAL_MASS: f64 = 1e-300;

/// Draw from `N(mean, sd²)` restricted to the open interval `bounds`.
///
/// Inverse-CDF sampling (always on the lower half of the axis, mirroring
/// when needed) covers the central regime; when the whole interval lies
/// beyond 4 standard deviations an exponential-proposal rejection sampler
/// takes over.
pub fn sample_truncnorm<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    bounds: TruncationBounds,
    rng: &mut R,
) -> Result<f64> {
    if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "truncated normal needs finite mean and positive sd, got ({mean}, {sd})"
        )));
    }
    let a = (bounds.lower - mean) / sd;
    let b = (bounds.upper - mean) / sd;
    let mass = normal_interval_prob(a, b);
    if !(mass >= MIN_INTERVAL_MASS) {
        return Err(Error::Underflow {
            lower: bounds.lower,
            upper: bounds.upper,
        });
    }
    let standard = if a >= TAIL_THRESHOLD {
        tail_rejection(a, b, rng)
    } else if b <= -TAIL_THRESHOLD {
        -tail_rejection(-b, -a, rng)
    } else if a > 0.0 {
        -inverse_cdf_lower(-b, -a, rng)
    } else {
        inverse_cdf_lower(a, b, rng)
    };
    let x = mean + sd * standard;
    if bounds.contains(x) {
        Ok(x)
    } else {
        // Only reachable when the interval is a few ulps wide.
        let mid = 0.5 * (bounds.lower + bounds.upper);
        if bounds.contains(mid) {
            Ok(mid)
        } else {
            Err(Error::Underflow {
                lower: bounds.lower,
                upper: bounds.upper,
            })
        }
    }
}

// Inverse-CDF draw on (a, b) with a <= 0, where Φ keeps relative precision.
fn inverse_cdf_lower<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let pa = normal_cdf(a);
    let pb = normal_cdf(b);
    for _ in 0..64 {
        let u: f64 = rng.random();
        let x = quantile_unchecked(pa + u * (pb - pa));
        if x > a && x < b {
            return x;
        }
    }
    0.5 * (a.max(-1e300) + b.min(1e300))
}

// Robert (1995): translated-exponential proposal on [a, b), a >= 4.
fn tail_rejection<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    let width_mass = if b.is_finite() {
        1.0 - (-rate * (b - a)).exp()
    } else {
        1.0
    };
    loop {
        let u: f64 = rng.random();
        let x = a - (1.0 - u * width_mass).ln() / rate;
        if !(x > a && x < b) {
            continue;
        }
        let accept = (-0.5 * (x - rate) * (x - rate)).exp();
        if rng.random::<f64>() <= accept {
            return x;
        }
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix. The error
/// names the (1-based) leading minor that failed.
pub fn cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape(format!(
            "cholesky needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let scale = a.amax().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::InvalidParameter(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { minor: j + 1 });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Multivariate normal draw `mean + L ε` with `L` the Cholesky factor.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &[f64],
    covariance: &DMatrix<f64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if covariance.nrows() != mean.len() {
        return Err(Error::Shape(format!(
            "mean has length {} but covariance is {}x{}",
            mean.len(),
            covariance.nrows(),
            covariance.ncols()
        )));
    }
    let l = cholesky(covariance)?;
    let eps: Vec<f64> = (0..mean.len()).map(|_| standard_normal(rng)).collect();
    Ok((0..mean.len())
        .map(|i| mean[i] + (0..=i).map(|k| l[(i, k)] * eps[k]).sum::<f64>())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> RngStream {
        RngStream::new(11, 0)
    }

    #[test]
    fn dirichlet_single_cell_is_degenerate() {
        assert_eq!(sample_dirichlet(&[5.0], &mut rng()).unwrap(), vec![1.0]);
    }

    #[test]
    fn dirichlet_rejects_nonpositive() {
        assert!(matches!(
            sample_dirichlet(&[1.0, 0.0], &mut rng()),
            Err(Error::InvalidParameter(_))
        ));
        assert!(sample_dirichlet(&[1.0, -2.0], &mut rng()).is_err());
    }

    #[test]
    fn dirichlet_symmetric_means() {
        let mut r = rng();
        let n = 100_000;
        let mut acc = [0.0; 3];
        for _ in 0..n {
            let d = sample_dirichlet(&[1.0, 1.0, 1.0], &mut r).unwrap();
            for k in 0..3 {
                acc[k] += d[k];
            }
        }
        for a in acc {
            assert!((a / n as f64 - 1.0 / 3.0).abs() < 0.005);
        }
    }

    #[test]
    fn dirichlet_tiny_concentrations_stay_on_simplex() {
        let mut r = rng();
        for _ in 0..10_000 {
            let d = sample_dirichlet(&[1e-3, 1e-2, 0.05, 1e-4], &mut r).unwrap();
            assert!(d.iter().all(|&x| x >= 0.0));
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn truncnorm_extreme_mean_respects_bounds() {
        let mut r = rng();
        let b = TruncationBounds::new(0.0, 1.0).unwrap();
        for _ in 0..10_000 {
            let x = sample_truncnorm(10.0, 1.0, b, &mut r).unwrap();
            assert!(x > 0.0 && x < 1.0);
        }
    }

    #[test]
    fn truncnorm_reports_negligible_mass() {
        let b = TruncationBounds::new(40.0, 41.0).unwrap();
        let err = sample_truncnorm(0.0, 1.0, b, &mut rng()).unwrap_err();
        assert!(matches!(err, Error::Underflow { lower, upper } if lower == 40.0 && upper == 41.0));
    }

    #[test]
    fn truncnorm_unbounded_mean() {
        let mut r = rng();
        let n = 100_000;
        let b = TruncationBounds::unbounded();
        let m: f64 = (0..n)
            .map(|_| sample_truncnorm(0.0, 1.0, b, &mut r).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!(m.abs() < 0.02);
    }

    #[test]
    fn bounds_must_be_ordered() {
        assert!(TruncationBounds::new(1.0, 1.0).is_err());
        assert!(TruncationBounds::new(2.0, 1.0).is_err());
        assert!(TruncationBounds::new(f64::NEG_INFINITY, f64::INFINITY).is_ok());
    }

    #[test]
    fn quantile_domain() {
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn cdf_symmetry() {
        assert_eq!(normal_cdf(0.0), 0.5);
        for x in [0.3, 1.7, 4.2] {
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cholesky_names_failing_minor() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        assert!(matches!(cholesky(&m), Err(Error::NotPositiveDefinite { minor: 3 })));
        let neg = DMatrix::from_row_slice(1, 1, &[-1.0]);
        assert!(matches!(cholesky(&neg), Err(Error::NotPositiveDefinite { minor: 1 })));
    }

    #[test]
    fn mvn_scalar_reduction() {
        let mut r = rng();
        let cov = DMatrix::from_element(1, 1, 4.0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_mvn(&[3.0], &cov, &mut r).unwrap()[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 3.0).abs() < 0.03);
        assert!((var - 4.0).abs() < 0.08);
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let mut a = RngStream::new(5, 1);
        let mut b = RngStream::new(5, 1);
        let mut c = RngStream::new(5, 2);
        let xa: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..16).map(|_| c.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn stream_ids_do_not_collide() {
        assert_ne!(stream::id(1, 0, 1), stream::id(0, 1, 1));
        assert_ne!(stream::id(0, 0, 1), stream::id(0, 0, 2));
    }
}
