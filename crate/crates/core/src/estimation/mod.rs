//! Analyst-side estimation from aggregated statistics.
//!
//! Everything here consumes group-level quantities only: decoded means and
//! variances come from [`AggregateState`] values, never from per-client data.

mod interval;

pub use interval::{
    asymptotic_ci, empirical_bernstein_halfwidth, nonasymptotic_ci, nonasymptotic_gamma, z_quantile, CiKind,
    Combination, ConfidenceInterval, Estimand,
};

use crate::error::{Error, Result};
use crate::mechanism::{pbm_decode_mean, pbm_decode_second_moment, pbm_variance_bound, MechanismSuite, PbmParams};
use crate::secagg::{AggregateState, Group, Moment};

/// Decoded means and clamped sample variances of both arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupEstimates {
    pub mean_c: f64,
    pub mean_t: f64,
    pub var_c: f64,
    pub var_t: f64,
    pub n_c: u64,
    pub n_t: u64,
}

impl GroupEstimates {
    pub fn new(mean_c: f64, var_c: f64, n_c: u64, mean_t: f64, var_t: f64, n_t: u64) -> Result<Self> {
        if n_c < 2 || n_t < 2 {
            return Err(Error::VarianceUndefined(n_c.min(n_t)));
        }
        if !(var_c >= 0.0 && var_t >= 0.0) {
            return Err(Error::Input(format!("sample variances must be >= 0 (got {var_c}, {var_t})")));
        }
        if !(mean_c.is_finite() && mean_t.is_finite()) {
            return Err(Error::Input("group means must be finite".into()));
        }
        Ok(Self { mean_c, mean_t, var_c, var_t, n_c, n_t })
    }

    /// Decodes the four aggregation rounds (two moments per group).
    pub fn from_aggregates(
        aggregates: &[AggregateState],
        control: &MechanismSuite,
        treatment: &MechanismSuite,
    ) -> Result<Self> {
        let find = |group: Group, moment: Moment| -> Result<&AggregateState> {
            let mut it = aggregates.iter().filter(|a| a.group == group && a.moment == moment);
            let first = it
                .next()
                .ok_or_else(|| Error::Protocol(format!("missing {group} aggregate for the {moment:?} moment")))?;
            if it.next().is_some() {
                return Err(Error::Protocol(format!("duplicate {group} aggregate for the {moment:?} moment")));
            }
            Ok(first)
        };
        let decode = |group: Group, suite: &MechanismSuite| -> Result<(f64, f64, u64)> {
            let a1 = find(group, Moment::First)?;
            let a2 = find(group, Moment::Second)?;
            if a1.count != a2.count {
                return Err(Error::Protocol(format!("{group} moments cover {} and {} clients", a1.count, a2.count)));
            }
            let mean = pbm_decode_mean(a1.sum, a1.count, &suite.first)?;
            let var = pbm_decode_second_moment(a2.sum, a2.count, &suite.second, mean)?;
            Ok((mean, var, a1.count))
        };
        let (mean_c, var_c, n_c) = decode(Group::Control, control)?;
        let (mean_t, var_t, n_t) = decode(Group::Treatment, treatment)?;
        Self::new(mean_c, var_c, n_c, mean_t, var_t, n_t)
    }

    pub fn n(&self) -> u64 {
        self.n_c + self.n_t
    }
}

/// `Δ̂ = μ̂_t − μ̂_c`.
pub fn diff_in_means(est: &GroupEstimates) -> f64 {
    est.mean_t - est.mean_c
}

/// Conservative plug-in for the variance of `Δ̂` around the sample effect:
/// `(n_c n_t / n) (ŝ_t/n_t + ŝ_c/n_c)²`.
///
/// This is already on the scale of `Var(Δ̂)`: with equal arms and equal
/// variances it coincides with [`pate_variance`].
pub fn sate_variance(est: &GroupEstimates) -> f64 {
    let (nc, nt) = (est.n_c as f64, est.n_t as f64);
    let s = est.var_t.sqrt() / nt + est.var_c.sqrt() / nc;
    nc * nt / (nc + nt) * s * s
}

/// `ŝ²_t/n_t + ŝ²_c/n_c`, the usual plug-in for `Var(Δ̂)` under sampling
/// from a population.
pub fn pate_variance(est: &GroupEstimates) -> f64 {
    est.var_t / est.n_t as f64 + est.var_c / est.n_c as f64
}

/// Variance that PBM adds to each group mean, and the induced calibration term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseProfile {
    /// Worst-case decoder variance of the control mean.
    pub v_c: f64,
    /// Worst-case decoder variance of the treatment mean.
    pub v_t: f64,
    /// `n (v_c + v_t)`: the DP term on the `√n` scale of the limit theorem.
    pub sigma2_pr: f64,
}

impl NoiseProfile {
    pub fn none() -> Self {
        Self { v_c: 0.0, v_t: 0.0, sigma2_pr: 0.0 }
    }

    /// Variance added to `Δ̂` by privatization.
    pub fn total(&self) -> f64 {
        self.v_c + self.v_t
    }
}

pub fn dp_calibration(first_c: &PbmParams, first_t: &PbmParams, n_c: u64, n_t: u64) -> Result<NoiseProfile> {
    if n_c == 0 || n_t == 0 {
        return Err(Error::EmptyGroup);
    }
    let v_c = pbm_variance_bound(first_c, n_c);
    let v_t = pbm_variance_bound(first_t, n_t);
    Ok(NoiseProfile { v_c, v_t, sigma2_pr: (n_c + n_t) as f64 * (v_c + v_t) })
}
