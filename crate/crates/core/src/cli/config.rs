//! Versioned TOML run configuration and its resolution into trial cells.

use serde::{Deserialize, Serialize};

use crate::accounting::{
    calibrate_gaussian, calibrate_suite, compose, default_alpha_grid, pbm_rdp_approx_curve, rdp_to_dp,
};
use crate::error::{Error, Result};
use crate::estimation::{CiKind, Combination, Estimand};
use crate::mechanism::{MechanismSuite, PbmParams};
use crate::simulation::{OutcomeModel, Privatizer, TrialConfig};

pub const SCHEMA_VERSION: u32 = 1;

fn default_fraction() -> f64 {
    0.99
}

fn default_delta() -> f64 {
    1e-5
}

fn default_confidence() -> f64 {
    0.9
}

/// One privatization scheme to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismSpec {
    /// PBM with `m1`/`m2` trials. Scales are calibrated per target epsilon
    /// unless given explicitly as `[θ₁, θ₂]` per arm.
    Pbm {
        m1: u64,
        m2: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta_control: Option<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta_treatment: Option<[f64; 2]>,
    },
    CentralGaussian,
    None,
}

impl MechanismSpec {
    pub fn label(&self) -> String {
        match self {
            MechanismSpec::Pbm { m1, m2, .. } if m1 == m2 => format!("pbm(m={m1})"),
            MechanismSpec::Pbm { m1, m2, .. } => format!("pbm(m1={m1};m2={m2})"),
            MechanismSpec::CentralGaussian => "central_gaussian".into(),
            MechanismSpec::None => "none".into(),
        }
    }
}

/// Full description of a `simulate` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub n: usize,
    pub n_c: usize,
    pub model: OutcomeModel,
    pub mechanisms: Vec<MechanismSpec>,
    /// Target epsilons for calibrated mechanisms.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_fraction")]
    pub budget_fraction: f64,
    pub estimand: Estimand,
    pub ci_kind: CiKind,
    #[serde(default)]
    pub combination: Combination,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    pub replications: u64,
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Config(format!("version: expected {SCHEMA_VERSION}, found {}", self.version)));
        }
        if self.n_c < 2 || self.n < self.n_c + 2 {
            return Err(Error::Config(format!(
                "n_c: both arms need at least 2 units (n = {}, n_c = {})",
                self.n, self.n_c
            )));
        }
        self.model.validate().map_err(|e| Error::Config(format!("model: {e}")))?;
        if self.mechanisms.is_empty() {
            return Err(Error::Config("mechanisms: at least one entry is required".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta: must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.budget_fraction > 0.0 && self.budget_fraction < 1.0) {
            return Err(Error::Config(format!("budget_fraction: must lie in (0, 1), got {}", self.budget_fraction)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config(format!("confidence: must lie in (0, 1), got {}", self.confidence)));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications: must be at least 1".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0)) {
            return Err(Error::Config(format!("epsilons: every target must be positive, got {e}")));
        }
        for (i, m) in self.mechanisms.iter().enumerate() {
            match m {
                MechanismSpec::Pbm { m1, m2, theta_control, theta_treatment } => {
                    if *m1 == 0 || *m2 == 0 {
                        return Err(Error::Config(format!("mechanisms[{i}]: m1 and m2 must be >= 1")));
                    }
                    match (theta_control, theta_treatment) {
                        (None, None) if self.epsilons.is_empty() => {
                            return Err(Error::Config(format!(
                                "mechanisms[{i}]: calibrated PBM needs a non-empty `epsilons` list"
                            )))
                        }
                        (Some(_), None) | (None, Some(_)) => {
                            return Err(Error::Config(format!(
                                "mechanisms[{i}]: give both theta_control and theta_treatment, or neither"
                            )))
                        }
                        _ => {}
                    }
                }
                MechanismSpec::CentralGaussian => {
                    if self.epsilons.is_empty() || self.epsilons.iter().any(|e| e.is_infinite()) {
                        return Err(Error::Config(format!(
                            "mechanisms[{i}]: the Gaussian baseline needs finite entries in `epsilons`"
                        )));
                    }
                }
                MechanismSpec::None => {}
            }
        }
        Ok(())
    }

    pub fn n_t(&self) -> usize {
        self.n - self.n_c
    }
}

/// A fully parameterized table cell: one mechanism at one privacy level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedCell {
    pub mechanism: String,
    /// Target (or, for explicit scales, achieved) epsilon; `inf` when non-private.
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m1: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m2: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_control: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_treatment: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl ResolvedCell {
    pub fn privatizer(&self, range: f64) -> Result<Privatizer> {
        if let (Some(m1), Some(m2), Some(tc), Some(tt)) = (self.m1, self.m2, self.theta_control, self.theta_treatment) {
            let suite = |t: [f64; 2]| -> Result<MechanismSuite> {
                Ok(MechanismSuite { first: PbmParams::new(m1, t[0], range)?, second: PbmParams::new(m2, t[1], range)? })
            };
            return Ok(Privatizer::Pbm { control: suite(tc)?, treatment: suite(tt)? });
        }
        if let Some(sigma) = self.sigma {
            return Ok(Privatizer::CentralGaussian(crate::mechanism::GaussianParams::new(sigma)?));
        }
        Ok(Privatizer::NonPrivate)
    }
}

/// Converted epsilon of an explicitly parameterized PBM pair over both arms.
fn achieved_epsilon(cfg: &RunConfig, m1: u64, m2: u64, tc: [f64; 2], tt: [f64; 2]) -> Result<f64> {
    let grid = default_alpha_grid();
    let mut worst: f64 = 0.0;
    for (n, t) in [(cfg.n_c as u64, tc), (cfg.n_t() as u64, tt)] {
        let curve = compose(&[pbm_rdp_approx_curve(n, m1, t[0], &grid)?, pbm_rdp_approx_curve(n, m2, t[1], &grid)?])?;
        worst = worst.max(rdp_to_dp(&curve, cfg.delta)?);
    }
    Ok(worst)
}

/// Resolves every (mechanism, epsilon) cell, running calibration where needed.
pub fn resolve_cells(cfg: &RunConfig) -> Result<Vec<ResolvedCell>> {
    let grid = default_alpha_grid();
    let range = cfg.model.range();
    let (n_c, n_t) = (cfg.n_c as u64, cfg.n_t() as u64);
    let mut cells = Vec::new();
    for spec in &cfg.mechanisms {
        let label = spec.label();
        match spec {
            MechanismSpec::Pbm { m1, m2, theta_control: Some(tc), theta_treatment: Some(tt) } => {
                let epsilon = achieved_epsilon(cfg, *m1, *m2, *tc, *tt)?;
                let cell = ResolvedCell {
                    mechanism: label,
                    epsilon,
                    m1: Some(*m1),
                    m2: Some(*m2),
                    theta_control: Some(*tc),
                    theta_treatment: Some(*tt),
                    sigma: None,
                };
                cells.push(cell);
            }
            MechanismSpec::Pbm { m1, m2, .. } => {
                for &eps in &cfg.epsilons {
                    let calibrate = |n| -> Result<[f64; 2]> {
                        let (s, _) = calibrate_suite(eps, cfg.delta, n, *m1, *m2, cfg.budget_fraction, range, &grid)?;
                        Ok([s.first.theta(), s.second.theta()])
                    };
                    let tc = calibrate(n_c)?;
                    let tt = if n_t == n_c { tc } else { calibrate(n_t)? };
                    let cell = ResolvedCell {
                        mechanism: label.clone(),
                        epsilon: eps,
                        m1: Some(*m1),
                        m2: Some(*m2),
                        theta_control: Some(tc),
                        theta_treatment: Some(tt),
                        sigma: None,
                    };
                    cells.push(cell);
                }
            }
            MechanismSpec::CentralGaussian => {
                let (fc, ft) = (n_c as f64, n_t as f64);
                let sensitivity = 2.0 * range * (1.0 / (fc * fc) + 1.0 / (ft * ft)).sqrt();
                for &eps in &cfg.epsilons {
                    let g = calibrate_gaussian(eps, cfg.delta, sensitivity, &grid)?;
                    let cell = ResolvedCell {
                        mechanism: label.clone(),
                        epsilon: eps,
                        m1: None,
                        m2: None,
                        theta_control: None,
                        theta_treatment: None,
                        sigma: Some(g.sigma()),
                    };
                    cells.push(cell);
                }
            }
            MechanismSpec::None => {
                let cell = ResolvedCell {
                    mechanism: label,
                    epsilon: f64::INFINITY,
                    m1: None,
                    m2: None,
                    theta_control: None,
                    theta_treatment: None,
                    sigma: None,
                };
                cells.push(cell);
            }
        }
    }
    Ok(cells)
}

/// Trial configuration for one resolved cell.
pub fn trial_config(cfg: &RunConfig, cell: &ResolvedCell) -> Result<TrialConfig> {
    Ok(TrialConfig {
        model: cfg.model,
        n: cfg.n,
        n_c: cfg.n_c,
        privatizer: cell.privatizer(cfg.model.range())?,
        estimand: cfg.estimand,
        ci_kind: cfg.ci_kind,
        level: cfg.confidence,
        combination: cfg.combination,
    })
}

/// The config echoed next to the results, with every derived parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub cells: Vec<ResolvedCell>,
}
