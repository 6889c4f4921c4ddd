//! Parameter searches that hit a target privacy budget.

use super::rdp::{gaussian_rdp_curve, pbm_rdp_approx_curve, rdp_to_dp, RdpCurve};
use crate::error::{Error, Result};
use crate::mechanism::{GaussianParams, MechanismSuite, PbmParams};

/// Absolute tolerance of the bisection on `θ`. Calibrated scales for small
/// budgets sit near `10^-3`, so a coarse tolerance would waste a visible
/// share of the budget.
pub const THETA_TOLERANCE: f64 = 1e-7;

const THETA_MAX: f64 = 0.25;
const THETA_MIN: f64 = 1e-9;

fn check_target(target_eps: f64, delta: f64) -> Result<()> {
    if !(target_eps > 0.0) {
        return Err(Error::Config(format!("target epsilon must be positive, got {target_eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Largest `θ` in `[lo, 0.25]` with `feasible(θ)`, assuming feasibility is
/// monotone (true below some threshold). Returns the feasible end.
fn bisect_theta(feasible: impl Fn(f64) -> Result<bool>) -> Result<Option<f64>> {
    if feasible(THETA_MAX)? {
        return Ok(Some(THETA_MAX));
    }
    if !feasible(THETA_MIN)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (THETA_MIN, THETA_MAX);
    while hi - lo > THETA_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Largest `θ ∈ (0, 1/4]` such that the approximate PBM curve for `n` clients
/// and `m` trials converts to at most `target_eps` at level `delta`.
/// An infinite target yields `θ = 1/4`.
pub fn calibrate_pbm(target_eps: f64, delta: f64, n: u64, m: u64, range: f64, alphas: &[f64]) -> Result<PbmParams> {
    check_target(target_eps, delta)?;
    if target_eps.is_infinite() {
        return PbmParams::new(m, THETA_MAX, range);
    }
    let theta = bisect_theta(|t| Ok(rdp_to_dp(&pbm_rdp_approx_curve(n, m, t, alphas)?, delta)? <= target_eps))?
        .ok_or_else(|| {
            Error::Calibration(format!(
                "epsilon = {target_eps} at delta = {delta} is unreachable with n = {n}, m = {m} on this order grid"
            ))
        })?;
    PbmParams::new(m, theta, range)
}

/// Largest `θ` whose approximate curve lies pointwise below `limit`.
pub fn calibrate_pbm_to_curve(limit: &RdpCurve, n: u64, m: u64, range: f64) -> Result<PbmParams> {
    let alphas: Vec<f64> = limit.alphas().collect();
    let theta = bisect_theta(|t| pbm_rdp_approx_curve(n, m, t, &alphas)?.dominated_by(limit))?
        .ok_or_else(|| Error::Calibration(format!("no PBM scale with n = {n}, m = {m} fits under the given curve")))?;
    PbmParams::new(m, theta, range)
}

/// A total RDP curve divided between the first- and second-moment randomizers.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetSplit {
    pub total: RdpCurve,
    pub fraction_first: f64,
    pub first: RdpCurve,
    pub second: RdpCurve,
}

pub fn split_budget(total: &RdpCurve, fraction_first: f64) -> Result<BudgetSplit> {
    if !(fraction_first > 0.0 && fraction_first < 1.0) {
        return Err(Error::Config(format!("budget fraction must lie in (0, 1), got {fraction_first}")));
    }
    Ok(BudgetSplit {
        total: total.clone(),
        fraction_first,
        first: total.scaled(fraction_first),
        second: total.scaled(1.0 - fraction_first),
    })
}

/// Calibrates both randomizers of one group of `n` clients to an overall
/// `(target_eps, delta)` guarantee.
///
/// The first-moment scale is chosen so that its curve, inflated by
/// `1/fraction_first`, converts to `target_eps`; that inflated curve is the
/// total budget. The second moment then gets the largest scale that fits
/// under the remaining `1 - fraction_first` share at every order.
pub fn calibrate_suite(
    target_eps: f64,
    delta: f64,
    n: u64,
    m_first: u64,
    m_second: u64,
    fraction_first: f64,
    range: f64,
    alphas: &[f64],
) -> Result<(MechanismSuite, Option<BudgetSplit>)> {
    check_target(target_eps, delta)?;
    if !(fraction_first > 0.0 && fraction_first < 1.0) {
        return Err(Error::Config(format!("budget fraction must lie in (0, 1), got {fraction_first}")));
    }
    if target_eps.is_infinite() {
        let suite = MechanismSuite {
            first: PbmParams::new(m_first, THETA_MAX, range)?,
            second: PbmParams::new(m_second, THETA_MAX, range)?,
        };
        return Ok((suite, None));
    }
    let theta1 = bisect_theta(|t| {
        let total = pbm_rdp_approx_curve(n, m_first, t, alphas)?.scaled(1.0 / fraction_first);
        Ok(rdp_to_dp(&total, delta)? <= target_eps)
    })?
    .ok_or_else(|| {
        Error::Calibration(format!(
            "epsilon = {target_eps} at delta = {delta} is unreachable for a group of {n} with m1 = {m_first}"
        ))
    })?;
    let first = PbmParams::new(m_first, theta1, range)?;
    let total = pbm_rdp_approx_curve(n, m_first, theta1, alphas)?.scaled(1.0 / fraction_first);
    let split = split_budget(&total, fraction_first)?;
    let second = calibrate_pbm_to_curve(&split.second, n, m_second, range)?;
    Ok((MechanismSuite { first, second }, Some(split)))
}

/// Smallest Gaussian noise scale meeting `(target_eps, delta)` for a query
/// of L2 sensitivity `sensitivity`.
pub fn calibrate_gaussian(target_eps: f64, delta: f64, sensitivity: f64, alphas: &[f64]) -> Result<GaussianParams> {
    check_target(target_eps, delta)?;
    if !(sensitivity > 0.0 && sensitivity.is_finite()) {
        return Err(Error::Config(format!("sensitivity must be positive, got {sensitivity}")));
    }
    if target_eps.is_infinite() {
        return Err(Error::Calibration("the Gaussian baseline needs a finite epsilon".into()));
    }
    // Search the noise multiplier z = σ/Δ so the result is exactly equivariant in Δ.
    let feasible =
        |z: f64| -> Result<bool> { Ok(rdp_to_dp(&gaussian_rdp_curve(1.0, z, alphas)?, delta)? <= target_eps) };
    let mut hi = 1.0;
    while !feasible(hi)? {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Calibration(format!(
                "epsilon = {target_eps} at delta = {delta} is unreachable on this order grid"
            )));
        }
    }
    let mut lo = hi / 2.0;
    while lo > 1e-12 && feasible(lo)? {
        hi = lo;
        lo /= 2.0;
    }
    while (hi - lo) > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    GaussianParams::new(hi * sensitivity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accounting::{compose, default_alpha_grid};

    #[test]
    fn infinite_target_saturates() {
        let grid = default_alpha_grid();
        assert_eq!(calibrate_pbm(f64::INFINITY, 1e-5, 100, 16, 1.0, &grid).unwrap().theta(), 0.25);
    }

    #[test]
    fn calibrated_theta_meets_target() {
        let grid = default_alpha_grid();
        for &eps in &[0.1, 0.5, 1.0] {
            let p = calibrate_pbm(eps, 1e-5, 1000, 64, 1.0, &grid).unwrap();
            let got = rdp_to_dp(&pbm_rdp_approx_curve(1000, 64, p.theta(), &grid).unwrap(), 1e-5).unwrap();
            assert!(got <= eps, "{got} > {eps}");
            let over =
                rdp_to_dp(&pbm_rdp_approx_curve(1000, 64, p.theta() + 2.0 * THETA_TOLERANCE, &grid).unwrap(), 1e-5)
                    .unwrap();
            assert!(over > eps * 0.999, "θ is not maximal: {over}");
        }
    }

    #[test]
    fn more_clients_never_shrink_theta() {
        let grid = default_alpha_grid();
        let mut last = 0.0;
        for n in [50u64, 100, 200, 400, 800] {
            let t = calibrate_pbm(0.5, 1e-5, n, 32, 1.0, &grid).unwrap().theta();
            assert!(t >= last);
            last = t;
        }
    }

    #[test]
    fn infeasible_target_is_reported() {
        let grid = [2.0, 4.0, 8.0];
        assert!(matches!(calibrate_pbm(0.01, 1e-5, 100, 16, 1.0, &grid), Err(Error::Calibration(_))));
        assert!(matches!(calibrate_gaussian(0.01, 1e-5, 1.0, &grid), Err(Error::Calibration(_))));
        assert!(calibrate_pbm(-1.0, 1e-5, 100, 16, 1.0, &grid).is_err());
    }

    #[test]
    fn split_properties() {
        let grid = default_alpha_grid();
        let total = pbm_rdp_approx_curve(500, 64, 0.05, &grid).unwrap();
        let half = split_budget(&total, 0.5).unwrap();
        assert_eq!(half.first, half.second);
        let s = split_budget(&total, 0.99).unwrap();
        for (a, b) in s.first.epsilons().zip(s.second.epsilons()) {
            assert!((a / b - 99.0).abs() < 1e-9);
        }
        let back = compose(&[s.first, s.second]).unwrap();
        for (a, b) in back.epsilons().zip(total.epsilons()) {
            assert!((a - b).abs() <= 1e-15 * b.max(1.0));
        }
        assert!(split_budget(&total, 1.0).is_err());
    }

    #[test]
    fn suite_respects_total_budget() {
        let grid = default_alpha_grid();
        let (suite, split) = calibrate_suite(1.0, 1e-5, 1000, 64, 64, 0.99, 1.0, &grid).unwrap();
        let split = split.unwrap();
        let c1 = pbm_rdp_approx_curve(1000, 64, suite.first.theta(), &grid).unwrap();
        let c2 = pbm_rdp_approx_curve(1000, 64, suite.second.theta(), &grid).unwrap();
        assert!(c2.dominated_by(&split.second).unwrap());
        let both = compose(&[c1, c2]).unwrap();
        assert!(rdp_to_dp(&both, 1e-5).unwrap() <= 1.0 + 1e-9);
        assert!(suite.second.theta() < suite.first.theta());
    }

    #[test]
    fn gaussian_calibration() {
        let grid = default_alpha_grid();
        let g1 = calibrate_gaussian(1.0, 1e-5, 0.01, &grid).unwrap();
        let g2 = calibrate_gaussian(2.0, 1e-5, 0.01, &grid).unwrap();
        assert!(g2.sigma() < g1.sigma());
        let g3 = calibrate_gaussian(1.0, 1e-5, 0.02, &grid).unwrap();
        assert_eq!(g3.sigma(), 2.0 * g1.sigma());
        let eps = rdp_to_dp(&gaussian_rdp_curve(0.01, g1.sigma(), &grid).unwrap(), 1e-5).unwrap();
        assert!(eps <= 1.0 + 1e-12 && eps > 1.0 - 1e-6, "{eps}");
    }
}
