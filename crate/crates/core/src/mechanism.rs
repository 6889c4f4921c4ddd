//! Client-side randomizers and server-side decoders.
//!
//! The Poisson-Binomial mechanism (PBM) maps a bounded outcome `x ∈ [-R, R]`
//! to a success probability `p = θx/R + 1/2` and reports a `Binomial(m, p)`
//! count. Sums of such counts decode to unbiased group means; a second,
//! independently randomized report of `x²` decodes to the group variance.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};

use crate::error::{Error, Result};

/// Configuration of one PBM randomizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbmParams {
    m: u64,
    theta: f64,
    range: f64,
}

impl PbmParams {
    /// `m` trials, scale `θ ∈ (0, 1/4]`, outcome half-range `R > 0`.
    pub fn new(m: u64, theta: f64, range: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("PBM needs at least one trial (m >= 1)".into()));
        }
        if !(theta > 0.0 && theta <= 0.25) {
            return Err(Error::Config(format!("PBM scale theta must lie in (0, 1/4], got {theta}")));
        }
        if !(range.is_finite() && range > 0.0) {
            return Err(Error::Config(format!("outcome half-range R must be positive, got {range}")));
        }
        Ok(Self { m, theta, range })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn range(&self) -> f64 {
        self.range
    }
}

/// Parameters for the first- and second-moment randomizers of one group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismSuite {
    pub first: PbmParams,
    pub second: PbmParams,
}

/// Central baseline: Gaussian noise added to the difference in means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    sigma: f64,
}

impl GaussianParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("noise standard deviation must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

fn clip(x: f64, range: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Input(format!("outcome {x} is not finite")));
    }
    if x.abs() > range {
        log::debug!("clipping outcome {x} to [-{range}, {range}]");
    }
    Ok(x.clamp(-range, range))
}

/// Success probability used to encode `x` (after clipping).
pub fn mean_probability(x: f64, params: &PbmParams) -> Result<f64> {
    let x = clip(x, params.range)?;
    Ok(params.theta / params.range * x + 0.5)
}

/// Success probability used to encode `x²` (after clipping `x`).
pub fn second_moment_probability(x: f64, params: &PbmParams) -> Result<f64> {
    let x = clip(x, params.range)?;
    let r2 = params.range * params.range;
    Ok(2.0 * params.theta * (x * x / r2 - 0.5) + 0.5)
}

fn binomial_draw<R: Rng + ?Sized>(m: u64, p: f64, rng: &mut R) -> u64 {
    // p is always within [1/4, 3/4] here, so construction cannot fail.
    Binomial::new(m, p).expect("probability in [1/4, 3/4]").sample(rng)
}

/// First-moment report: `Binomial(m, θx/R + 1/2)`.
pub fn pbm_encode_mean<R: Rng + ?Sized>(x: f64, params: &PbmParams, rng: &mut R) -> Result<u64> {
    let p = mean_probability(x, params)?;
    Ok(binomial_draw(params.m, p, rng))
}

/// Second-moment report: `Binomial(m₂, 2θ₂(x²/R² − 1/2) + 1/2)`.
pub fn pbm_encode_second_moment<R: Rng + ?Sized>(x: f64, params: &PbmParams, rng: &mut R) -> Result<u64> {
    let q = second_moment_probability(x, params)?;
    Ok(binomial_draw(params.m, q, rng))
}

/// Unbiased estimate of the group mean from the aggregated first-moment
/// counts: `R / (n m θ) · (sum − n m / 2)`.
pub fn pbm_decode_mean(agg_sum: u64, group_size: u64, params: &PbmParams) -> Result<f64> {
    if group_size == 0 {
        return Err(Error::EmptyGroup);
    }
    let nm = group_size as f64 * params.m as f64;
    if agg_sum as f64 > nm {
        return Err(Error::Input(format!("aggregate {agg_sum} exceeds n*m = {nm}")));
    }
    Ok(params.range / (nm * params.theta) * (agg_sum as f64 - nm / 2.0))
}

/// Unbiased estimate of `Σ x_i²` from the aggregated second-moment counts.
pub fn decode_sum_of_squares(agg_sum2: u64, group_size: u64, params: &PbmParams) -> f64 {
    let r2 = params.range * params.range;
    let n = group_size as f64;
    r2 / (2.0 * params.m as f64 * params.theta) * agg_sum2 as f64 - n * r2 / (4.0 * params.theta) + n * r2 / 2.0
}

/// Sample variance before the positive-part clamp. May be negative.
pub fn pbm_decode_second_moment_raw(agg_sum2: u64, group_size: u64, params: &PbmParams, mean: f64) -> Result<f64> {
    if group_size <= 1 {
        return Err(Error::VarianceUndefined(group_size));
    }
    if agg_sum2 > group_size * params.m {
        return Err(Error::Input(format!("aggregate {agg_sum2} exceeds n*m = {}", group_size * params.m)));
    }
    let n = group_size as f64;
    let t = decode_sum_of_squares(agg_sum2, group_size, params);
    Ok(t / (n - 1.0) - n / (n - 1.0) * mean * mean)
}

/// Clamped sample variance of a group, always `>= 0`.
pub fn pbm_decode_second_moment(agg_sum2: u64, group_size: u64, params: &PbmParams, mean: f64) -> Result<f64> {
    pbm_decode_second_moment_raw(agg_sum2, group_size, params, mean).map(|v| v.max(0.0))
}

/// Worst-case variance of the group-mean decoder, `R² / (4 n m θ²)`,
/// attained when every client sends `x = 0`.
pub fn pbm_variance_bound(params: &PbmParams, group_size: u64) -> f64 {
    params.range * params.range / (4.0 * group_size as f64 * params.m as f64 * params.theta * params.theta)
}

/// Adds `N(0, σ²)` to the difference-in-means estimate.
pub fn gaussian_perturb<R: Rng + ?Sized>(delta_hat: f64, params: &GaussianParams, rng: &mut R) -> f64 {
    let normal = Normal::new(0.0, params.sigma).expect("sigma validated at construction");
    delta_hat + normal.sample(rng)
}
