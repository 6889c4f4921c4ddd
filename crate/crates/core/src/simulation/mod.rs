//! End-to-end trials and Monte Carlo replication.
//!
//! A trial samples outcomes, assigns treatment, privatizes each group,
//! aggregates through simulated SecAgg, decodes, and builds an interval.
//! Trial `i` of a run draws every random stream from
//! `derive(base_seed, Trial, i, 0)`, so reports do not depend on scheduling.

mod model;

pub use model::{assign_treatment, sample_outcomes, OutcomeModel, PotentialOutcomes};

use crate::error::{Error, Result};
use crate::estimation::{
    asymptotic_ci, diff_in_means, dp_calibration, nonasymptotic_ci, pate_variance, sate_variance, CiKind, Combination,
    ConfidenceInterval, Estimand, GroupEstimates,
};
use crate::mechanism::{gaussian_perturb, pbm_encode_mean, pbm_encode_second_moment, GaussianParams, MechanismSuite};
use crate::parallel;
use crate::secagg::{AggregateState, Group, Moment, SecAggSession};
use crate::seed::{self, Purpose};

/// How group statistics are privatized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Privatizer {
    /// Local PBM randomization with SecAgg, one suite per group.
    Pbm {
        control: MechanismSuite,
        treatment: MechanismSuite,
    },
    /// Trusted curator adding Gaussian noise to `Δ̂`.
    CentralGaussian(GaussianParams),
    NonPrivate,
}

/// Everything that determines a single trial apart from its seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub model: OutcomeModel,
    pub n: usize,
    pub n_c: usize,
    pub privatizer: Privatizer,
    pub estimand: Estimand,
    pub ci_kind: CiKind,
    /// Confidence `1 − α_conf`; the non-asymptotic interval uses `δ = α_conf`.
    pub level: f64,
    pub combination: Combination,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.n_c < 2 || self.n < self.n_c + 2 {
            return Err(Error::Config(format!("both arms need at least 2 units (n = {}, n_c = {})", self.n, self.n_c)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("confidence level must lie in (0, 1), got {}", self.level)));
        }
        if let Privatizer::Pbm { control, treatment } = &self.privatizer {
            let range = self.model.range();
            for p in [control.first, control.second, treatment.first, treatment.second] {
                if p.range() != range {
                    return Err(Error::Config(format!(
                        "PBM range {} differs from the outcome range {range}",
                        p.range()
                    )));
                }
            }
        }
        if self.ci_kind == CiKind::Nonasymptotic {
            if self.n != 2 * self.n_c {
                return Err(Error::Config("the non-asymptotic interval requires n_c = n_t".into()));
            }
            match self.privatizer {
                Privatizer::CentralGaussian(_) => {
                    return Err(Error::Config("the non-asymptotic interval is defined for PBM or no privacy".into()))
                }
                Privatizer::Pbm { control, treatment } if control != treatment => {
                    return Err(Error::Config("the non-asymptotic interval needs one PBM suite for both arms".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub ci: ConfidenceInterval,
    pub truth: f64,
    pub covered: bool,
    pub width: f64,
}

fn plaintext_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Privatizes one group with PBM and runs both SecAgg rounds.
fn pbm_group(group: Group, values: &[f64], suite: &MechanismSuite, trial_seed: u64) -> Result<[AggregateState; 2]> {
    let g = group.index();
    let mut rng1 = seed::stream(trial_seed, Purpose::EncodeFirst, g, 0);
    let mut rng2 = seed::stream(trial_seed, Purpose::EncodeSecond, g, 0);
    let first = values.iter().map(|&x| pbm_encode_mean(x, &suite.first, &mut rng1)).collect::<Result<Vec<_>>>()?;
    let second =
        values.iter().map(|&x| pbm_encode_second_moment(x, &suite.second, &mut rng2)).collect::<Result<Vec<_>>>()?;
    let session = |moment: Moment, m: u64| {
        SecAggSession::new(group, moment, values.len(), m, seed::derive(trial_seed, Purpose::Masks, g, moment.index()))
    };
    Ok([
        session(Moment::First, suite.first.m())?.run(&first)?,
        session(Moment::Second, suite.second.m())?.run(&second)?,
    ])
}

/// Runs trial `index` of the experiment seeded by `base_seed`.
pub fn run_trial(cfg: &TrialConfig, base_seed: u64, index: u64) -> Result<TrialResult> {
    let trial_seed = seed::derive(base_seed, Purpose::Trial, index, 0);
    let outcomes = sample_outcomes(&cfg.model, cfg.n, seed::derive(trial_seed, Purpose::Outcomes, 0, 0))?;
    let labels = assign_treatment(cfg.n, cfg.n_c, seed::derive(trial_seed, Purpose::Assignment, 0, 0))?;
    let mut observed_c = Vec::with_capacity(cfg.n_c);
    let mut observed_t = Vec::with_capacity(cfg.n - cfg.n_c);
    for (i, g) in labels.iter().enumerate() {
        match g {
            Group::Control => observed_c.push(outcomes.control[i]),
            Group::Treatment => observed_t.push(outcomes.treatment[i]),
        }
    }
    let (n_c, n_t) = (observed_c.len() as u64, observed_t.len() as u64);
    let range = cfg.model.range();

    let (est, center, dp_var, suite) = match &cfg.privatizer {
        Privatizer::Pbm { control, treatment } => {
            // Per-client values stop here; only the four aggregates move on.
            let [c1, c2] = pbm_group(Group::Control, &observed_c, control, trial_seed)?;
            let [t1, t2] = pbm_group(Group::Treatment, &observed_t, treatment, trial_seed)?;
            let est = GroupEstimates::from_aggregates(&[c1, c2, t1, t2], control, treatment)?;
            let noise = dp_calibration(&control.first, &treatment.first, n_c, n_t)?;
            (est, diff_in_means(&est), noise.total(), Some(control))
        }
        Privatizer::CentralGaussian(params) => {
            let (mc, vc) = plaintext_stats(&observed_c);
            let (mt, vt) = plaintext_stats(&observed_t);
            let est = GroupEstimates::new(mc, vc, n_c, mt, vt, n_t)?;
            let mut rng = seed::stream(trial_seed, Purpose::CentralNoise, 0, 0);
            let center = gaussian_perturb(diff_in_means(&est), params, &mut rng);
            (est, center, params.sigma() * params.sigma(), None)
        }
        Privatizer::NonPrivate => {
            let (mc, vc) = plaintext_stats(&observed_c);
            let (mt, vt) = plaintext_stats(&observed_t);
            let est = GroupEstimates::new(mc, vc, n_c, mt, vt, n_t)?;
            (est, diff_in_means(&est), 0.0, None)
        }
    };

    let ci = match cfg.ci_kind {
        CiKind::Asymptotic => {
            let sampling = match cfg.estimand {
                Estimand::Pate => pate_variance(&est),
                Estimand::Sate => sate_variance(&est),
            };
            asymptotic_ci(center, sampling, dp_var, cfg.level, cfg.estimand, cfg.combination)?
        }
        CiKind::Nonasymptotic => nonasymptotic_ci(center, &est, range, suite, 1.0 - cfg.level, cfg.estimand)?,
    };
    let truth = match cfg.estimand {
        Estimand::Pate => cfg.model.pate(),
        Estimand::Sate => outcomes.sate(),
    };
    Ok(TrialResult { ci, truth, covered: ci.contains(truth), width: ci.width() })
}

/// Summary of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentReport {
    pub replications: u64,
    pub covered: u64,
    pub coverage: f64,
    pub mean_width: f64,
    /// Standard error of `mean_width` across trials.
    pub width_std_err: f64,
    /// Mean of `center − truth`.
    pub mean_error: f64,
    /// Standard error of `mean_error`.
    pub error_std_err: f64,
}

fn mean_and_se(xs: impl Iterator<Item = f64> + Clone, n: f64) -> (f64, f64) {
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Summarizes trial results in index order.
pub fn summarize(results: &[TrialResult]) -> Result<ExperimentReport> {
    if results.is_empty() {
        return Err(Error::Config("a Monte Carlo run needs at least one replication".into()));
    }
    let n = results.len() as f64;
    let covered = results.iter().filter(|r| r.covered).count() as u64;
    let (mean_width, width_std_err) = mean_and_se(results.iter().map(|r| r.width), n);
    let (mean_error, error_std_err) = mean_and_se(results.iter().map(|r| r.ci.center - r.truth), n);
    Ok(ExperimentReport {
        replications: results.len() as u64,
        covered,
        coverage: covered as f64 / n,
        mean_width,
        width_std_err,
        mean_error,
        error_std_err,
    })
}

/// Runs `replications` independent trials in parallel and summarizes them.
/// The report is identical for every thread count.
pub fn run_monte_carlo(cfg: &TrialConfig, replications: u64, base_seed: u64) -> Result<ExperimentReport> {
    cfg.validate()?;
    let results = parallel::map_indexed(replications as usize, |i| run_trial(cfg, base_seed, i as u64));
    summarize(&results.into_iter().collect::<Result<Vec<_>>>()?)
}

/// Single-threaded variant of [`run_monte_carlo`].
pub fn run_monte_carlo_sequential(cfg: &TrialConfig, replications: u64, base_seed: u64) -> Result<ExperimentReport> {
    cfg.validate()?;
    let results = parallel::map_indexed_sequential(replications as usize, |i| run_trial(cfg, base_seed, i as u64));
    summarize(&results.into_iter().collect::<Result<Vec<_>>>()?)
}
