//! Rényi-DP accounting for PBM and the central Gaussian baseline.

mod calibrate;
mod logpmf;
mod rdp;

pub use calibrate::{
    calibrate_gaussian, calibrate_pbm, calibrate_pbm_to_curve, calibrate_suite, split_budget, BudgetSplit,
    THETA_TOLERANCE,
};
pub use logpmf::{binomial_log_pmf, log_convolve, logsumexp, LogPmf};
pub use rdp::{
    compose, gaussian_rdp_curve, pbm_approx_pair, pbm_exact_pair, pbm_rdp_approx, pbm_rdp_approx_curve,
    pbm_rdp_approx_sweep, pbm_rdp_exact, pbm_rdp_exact_curve, rdp_to_dp, renyi_divergence, RdpCurve,
};

/// Largest `m·n` for which exact accounting is attempted.
pub const EXACT_SUPPORT_LIMIT: u64 = 10_000_000;

/// Default grid of Rényi orders: quarter steps from 1.25 to 8, every integer
/// from 9 to 64, and a sparse tail up to 1024. The tail matters for small
/// targets such as `ε = 0.1` at `δ = 10^-5`, which no order below ~70 can
/// certify; the quarter steps keep conversion of large budgets tight.
pub fn default_alpha_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (5..=32).map(|i| f64::from(i) / 4.0).collect();
    grid.extend((9..=64).map(f64::from));
    grid.extend([80.0, 96.0, 128.0, 160.0, 192.0, 256.0, 384.0, 512.0, 768.0, 1024.0]);
    grid
}
