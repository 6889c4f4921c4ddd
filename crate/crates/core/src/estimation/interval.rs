//! Asymptotic and empirical-Bernstein confidence intervals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{pate_variance, sate_variance, GroupEstimates};
use crate::error::{Error, Result};
use crate::mechanism::MechanismSuite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimand {
    Sate,
    Pate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiKind {
    Asymptotic,
    Nonasymptotic,
}

/// How the sampling and privacy terms of an asymptotic interval combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combination {
    /// `z·√(σ̂² + σ²_dp)`, the variance of `Δ̂` under both noise sources.
    #[default]
    Quadrature,
    /// `z·(σ̂ + σ_dp)`, a strictly wider interval.
    Additive,
}

macro_rules! text_enum {
    ($ty:ty { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok(Self::$variant),)+
                    other => Err(Error::Config(format!("unknown {} `{other}`", stringify!($ty)))),
                }
            }
        }
    };
}

text_enum!(Estimand { Sate => "sate", Pate => "pate" });
text_enum!(CiKind { Asymptotic => "asymptotic", Nonasymptotic => "nonasymptotic" });
text_enum!(Combination { Quadrature => "quadrature", Additive => "additive" });

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub center: f64,
    pub half_width: f64,
    /// Confidence `1 − α_conf`.
    pub level: f64,
    pub kind: CiKind,
    pub estimand: Estimand,
}

impl ConfidenceInterval {
    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn width(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.center).abs() <= self.half_width
    }
}

/// Standard normal quantile.
pub fn z_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Input(format!("quantile level must lie in (0, 1), got {p}")));
    }
    Ok(Normal::standard().inverse_cdf(p))
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Input(format!("confidence level must lie in (0, 1), got {level}")));
    }
    Ok(())
}

/// Normal-approximation interval `Δ̂ ± z_{1−α_conf/2}·s` where `s` combines
/// the sampling variance of `Δ̂` with the privacy noise variance.
pub fn asymptotic_ci(
    delta_hat: f64,
    sampling_var: f64,
    dp_var: f64,
    level: f64,
    estimand: Estimand,
    combination: Combination,
) -> Result<ConfidenceInterval> {
    check_level(level)?;
    if !(sampling_var >= 0.0 && dp_var >= 0.0) {
        return Err(Error::Input(format!("variances must be >= 0 (got {sampling_var}, {dp_var})")));
    }
    let z = z_quantile(0.5 + level / 2.0)?;
    let spread = match combination {
        Combination::Quadrature => (sampling_var + dp_var).sqrt(),
        Combination::Additive => sampling_var.sqrt() + dp_var.sqrt(),
    };
    Ok(ConfidenceInterval { center: delta_hat, half_width: z * spread, level, kind: CiKind::Asymptotic, estimand })
}

/// Empirical Bernstein half-width for the mean of `n` i.i.d. draws in
/// `[-bound, bound]` with sample variance `s2` (the usual `1/(n−1)` form):
/// `√(2 s² log(2/δ₁)/n) + 14·bound·log(2/δ₂)/(3(n−1))`.
pub fn empirical_bernstein_halfwidth(s2: f64, n: u64, bound: f64, delta1: f64, delta2: f64) -> Result<f64> {
    if n <= 1 {
        return Err(Error::Input(format!("empirical Bernstein needs at least 2 samples, got {n}")));
    }
    for d in [delta1, delta2] {
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::Input(format!("failure probability must lie in (0, 1), got {d}")));
        }
    }
    let nf = n as f64;
    Ok((2.0 * s2.max(0.0) * (2.0 / delta1).ln() / nf).sqrt() + 14.0 * bound * (2.0 / delta2).ln() / (3.0 * (nf - 1.0)))
}

/// Higher-order term `γ` of the non-asymptotic interval for `n` total units
/// in two equal arms. `suite = None` drops the privacy contributions.
pub fn nonasymptotic_gamma(
    n: u64,
    range: f64,
    suite: Option<&MechanismSuite>,
    var_sum: f64,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Input(format!("delta must lie in (0, 1), got {delta}")));
    }
    if n < 4 {
        return Err(Error::Input(format!("need at least two units per arm, got n = {n}")));
    }
    let nf = n as f64;
    let l = (1200.0 / delta).ln();
    let mut gamma = 56.0 * range * l / (3.0 * (nf - 1.0));
    if let Some(s) = suite {
        let (m1, t1) = (s.first.m() as f64, s.first.theta());
        let (m2, t2) = (s.second.m() as f64, s.second.theta());
        let r2 = range * range;
        let first = l * r2 / (2.0 * m1 * nf * t1 * t1);
        let second = l * r2 * r2 / (4.0 * m2 * nf * t2 * t2);
        let a = second.powf(0.25) + first.powf(0.25);
        let b = if var_sum > 0.0 { (second.sqrt() + first.sqrt()) / var_sum.sqrt() } else { f64::INFINITY };
        gamma += first.sqrt() + (4.0 * (2.01 / delta).ln() / nf).sqrt() * a.min(b);
    }
    Ok(gamma)
}

/// Non-asymptotic interval `Δ̂ ± (√(2 σ̂² log(2.01/δ)) + γ)`, valid with
/// probability at least `1 − δ`. Requires equal arms.
pub fn nonasymptotic_ci(
    delta_hat: f64,
    est: &GroupEstimates,
    range: f64,
    suite: Option<&MechanismSuite>,
    delta: f64,
    estimand: Estimand,
) -> Result<ConfidenceInterval> {
    if est.n_c != est.n_t {
        return Err(Error::Input(format!(
            "the non-asymptotic interval requires equal arms (n_c = {}, n_t = {})",
            est.n_c, est.n_t
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Input(format!("delta must lie in (0, 1), got {delta}")));
    }
    let var = match estimand {
        Estimand::Pate => pate_variance(est),
        Estimand::Sate => sate_variance(est),
    };
    let gamma = nonasymptotic_gamma(est.n(), range, suite, est.var_c + est.var_t, delta)?;
    let half_width = (2.0 * var * (2.01 / delta).ln()).sqrt() + gamma;
    Ok(ConfidenceInterval { center: delta_hat, half_width, level: 1.0 - delta, kind: CiKind::Nonasymptotic, estimand })
}
