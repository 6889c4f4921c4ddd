//! Potential-outcome generators and random assignment.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as StdNormal};

use crate::error::{Error, Result};
use crate::secagg::Group;
use crate::seed::rng_from_seed;

const MIN_ACCEPTANCE: f64 = 1e-6;

/// Data-generating process for `(y(c), y(t))` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OutcomeModel {
    /// Independent `N(μ_c, σ²)` and `N(μ_t, σ²)` truncated to `[-R, R]`.
    TruncatedGaussian { mu_c: f64, mu_t: f64, sigma: f64, range: f64 },
    /// `y(c) ~ Uniform(a, b)` and `y(t) = y(c) + effect`.
    ConstantEffect { a: f64, b: f64, effect: f64, range: f64 },
}

fn acceptance(mu: f64, sigma: f64, range: f64) -> f64 {
    let z = StdNormal::standard();
    z.cdf((range - mu) / sigma) - z.cdf((-range - mu) / sigma)
}

/// Mean of `N(μ, σ²)` conditioned on `[-R, R]`.
fn truncated_mean(mu: f64, sigma: f64, range: f64) -> f64 {
    let z = StdNormal::standard();
    let (lo, hi) = ((-range - mu) / sigma, (range - mu) / sigma);
    // Use upper-tail probabilities when the window sits above the mean.
    let mass = if lo > 0.0 { z.sf(lo) - z.sf(hi) } else { z.cdf(hi) - z.cdf(lo) };
    mu + sigma * (z.pdf(lo) - z.pdf(hi)) / mass
}

impl OutcomeModel {
    pub fn range(&self) -> f64 {
        match *self {
            OutcomeModel::TruncatedGaussian { range, .. } | OutcomeModel::ConstantEffect { range, .. } => range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let range = self.range();
        if !(range.is_finite() && range > 0.0) {
            return Err(Error::Config(format!("outcome range must be positive, got {range}")));
        }
        match *self {
            OutcomeModel::TruncatedGaussian { mu_c, mu_t, sigma, range } => {
                if !(sigma.is_finite() && sigma > 0.0) || !mu_c.is_finite() || !mu_t.is_finite() {
                    return Err(Error::Config("truncated Gaussian needs finite means and sigma > 0".into()));
                }
                for (name, mu) in [("control", mu_c), ("treatment", mu_t)] {
                    let acc = acceptance(mu, sigma, range);
                    if !(acc >= MIN_ACCEPTANCE) {
                        return Err(Error::Config(format!(
                            "{name} outcome distribution keeps only {acc:e} of its mass inside [-{range}, {range}]"
                        )));
                    }
                }
            }
            OutcomeModel::ConstantEffect { a, b, effect, range } => {
                if !(a < b) {
                    return Err(Error::Config(format!("uniform support needs a < b, got [{a}, {b}]")));
                }
                if a < -range || b > range || a + effect < -range || b + effect > range {
                    return Err(Error::Config(format!(
                        "both [{a}, {b}] and its shift by {effect} must lie in [-{range}, {range}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Population effect `E[y(t)] − E[y(c)]` of the model as sampled.
    pub fn pate(&self) -> f64 {
        match *self {
            OutcomeModel::TruncatedGaussian { mu_c, mu_t, sigma, range } => {
                truncated_mean(mu_t, sigma, range) - truncated_mean(mu_c, sigma, range)
            }
            OutcomeModel::ConstantEffect { effect, .. } => effect,
        }
    }
}

/// Realized potential outcomes for `n` units.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOutcomes {
    pub control: Vec<f64>,
    pub treatment: Vec<f64>,
}

impl PotentialOutcomes {
    pub fn len(&self) -> usize {
        self.control.len()
    }

    pub fn is_empty(&self) -> bool {
        self.control.is_empty()
    }

    /// Sample effect over all units.
    pub fn sate(&self) -> f64 {
        let n = self.len() as f64;
        self.treatment.iter().zip(&self.control).map(|(t, c)| t - c).sum::<f64>() / n
    }
}

fn truncated_draw<R: Rng + ?Sized>(normal: &Normal<f64>, range: f64, rng: &mut R) -> f64 {
    loop {
        let y = normal.sample(rng);
        if (-range..=range).contains(&y) {
            return y;
        }
    }
}

pub fn sample_outcomes(model: &OutcomeModel, n: usize, seed: u64) -> Result<PotentialOutcomes> {
    model.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut control = Vec::with_capacity(n);
    let mut treatment = Vec::with_capacity(n);
    match *model {
        OutcomeModel::TruncatedGaussian { mu_c, mu_t, sigma, range } => {
            let nc = Normal::new(mu_c, sigma).map_err(|e| Error::Config(e.to_string()))?;
            let nt = Normal::new(mu_t, sigma).map_err(|e| Error::Config(e.to_string()))?;
            for _ in 0..n {
                control.push(truncated_draw(&nc, range, &mut rng));
                treatment.push(truncated_draw(&nt, range, &mut rng));
            }
        }
        OutcomeModel::ConstantEffect { a, b, effect, .. } => {
            let u = Uniform::new(a, b).map_err(|e| Error::Config(e.to_string()))?;
            for _ in 0..n {
                let y = u.sample(&mut rng);
                control.push(y);
                treatment.push(y + effect);
            }
        }
    }
    Ok(PotentialOutcomes { control, treatment })
}

/// Completely randomized design: a uniformly random set of `n_c` units is
/// assigned to control, the rest to treatment.
pub fn assign_treatment(n: usize, n_c: usize, seed: u64) -> Result<Vec<Group>> {
    if n_c == 0 || n_c >= n {
        return Err(Error::Config(format!("need 0 < n_c < n, got n_c = {n_c}, n = {n}")));
    }
    let mut labels: Vec<Group> = (0..n).map(|i| if i < n_c { Group::Control } else { Group::Treatment }).collect();
    labels.shuffle(&mut rng_from_seed(seed));
    Ok(labels)
}
