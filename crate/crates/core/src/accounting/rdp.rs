//! Rényi divergences, PBM privacy curves, composition and conversion.

use super::logpmf::{binomial_log_pmf, log_convolve, logsumexp, LogPmf};
use super::EXACT_SUPPORT_LIMIT;
use crate::error::{Error, Result};

/// A Rényi-DP guarantee tabulated on a grid of orders.
#[derive(Debug, Clone, PartialEq)]
pub struct RdpCurve {
    points: Vec<(f64, f64)>,
}

impl RdpCurve {
    /// Orders must be `> 1` and strictly increasing; values must be `>= 0`.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(alpha, eps)) in points.iter().enumerate() {
            if !(alpha > 1.0) || !alpha.is_finite() {
                return Err(Error::Config(format!("Rényi order must be finite and > 1, got {alpha}")));
            }
            if i > 0 && alpha <= points[i - 1].0 {
                return Err(Error::Config("Rényi orders must be strictly increasing".into()));
            }
            if eps.is_nan() || eps < 0.0 {
                return Err(Error::Config(format!("RDP value at order {alpha} must be >= 0, got {eps}")));
            }
        }
        Ok(Self { points })
    }

    /// Builds a curve by evaluating `f` on every order of `alphas`.
    pub fn from_fn(alphas: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(alphas.iter().map(|&a| (a, f(a))).collect())
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn alphas(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn epsilons(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Multiplies every value by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { points: self.points.iter().map(|&(a, e)| (a, e * factor)).collect() }
    }

    /// True when values are nondecreasing in the order, allowing `slack`
    /// relative rounding error.
    pub fn is_nondecreasing(&self, slack: f64) -> bool {
        self.points.windows(2).all(|w| w[1].1 >= w[0].1 * (1.0 - slack) - f64::EPSILON)
    }

    /// Pointwise `self <= other` on a shared grid.
    pub fn dominated_by(&self, other: &RdpCurve) -> Result<bool> {
        check_same_grid(self, other)?;
        Ok(self.points.iter().zip(&other.points).all(|(a, b)| a.1 <= b.1))
    }
}

fn check_same_grid(a: &RdpCurve, b: &RdpCurve) -> Result<()> {
    if a.points.len() != b.points.len() || a.alphas().zip(b.alphas()).any(|(x, y)| x != y) {
        return Err(Error::Config("RDP curves are tabulated on different order grids".into()));
    }
    Ok(())
}

/// `D_α(p ‖ q) = 1/(α-1) · log Σ_k exp(α p_k + (1-α) q_k)`.
///
/// Supports of different length are padded with `-∞`. Returns `+∞` when `p`
/// puts mass where `q` has none.
pub fn renyi_divergence(p: &LogPmf, q: &LogPmf, alpha: f64) -> f64 {
    assert!(alpha > 1.0, "Rényi order must exceed 1");
    let len = p.len().max(q.len());
    let get = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(f64::NEG_INFINITY);
    let mut terms = Vec::with_capacity(len);
    for k in 0..len {
        let pk = get(p.log_probs(), k);
        if pk == f64::NEG_INFINITY {
            continue;
        }
        let qk = get(q.log_probs(), k);
        if qk == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        terms.push(alpha * pk + (1.0 - alpha) * qk);
    }
    (logsumexp(&terms) / (alpha - 1.0)).max(0.0)
}

fn check_pbm_inputs(n: u64, theta: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::Config(format!("PBM accounting needs at least 2 clients, got {n}")));
    }
    if !(theta > 0.0 && theta <= 0.25) {
        return Err(Error::Config(format!("PBM scale theta must lie in (0, 1/4], got {theta}")));
    }
    Ok(())
}

/// Neighbouring output distributions for exact accounting at the worst-case
/// pair: `Binom(mn, ½-θ)` against `Binom(m(n-1), ½-θ) ⊛ Binom(m, ½+θ)`.
pub fn pbm_exact_pair(n: u64, m: u64, theta: f64) -> Result<(LogPmf, LogPmf)> {
    check_pbm_inputs(n, theta)?;
    let mn = n.checked_mul(m).ok_or(Error::ExactTooLarge(u64::MAX))?;
    if mn > EXACT_SUPPORT_LIMIT {
        return Err(Error::ExactTooLarge(mn));
    }
    let lo = 0.5 - theta;
    let hi = 0.5 + theta;
    let p1 = binomial_log_pmf(mn, lo)?;
    let p2 = log_convolve(&binomial_log_pmf(mn - m, lo)?, &binomial_log_pmf(m, hi)?);
    Ok((p1, p2))
}

/// Single-replication pair of the data-processing bound, indexed by how many
/// of the other `n - 1` clients sit at the low end:
/// `Binom(1+k, ½-θ) ⊛ Binom(n-k-1, ½+θ)` against `Binom(k, ½-θ) ⊛ Binom(n-k, ½+θ)`.
/// `k = n - 1` is the configuration the default approximation uses.
pub fn pbm_approx_pair(n: u64, theta: f64, k: u64) -> Result<(LogPmf, LogPmf)> {
    check_pbm_inputs(n, theta)?;
    if k >= n {
        return Err(Error::Config(format!("configuration index {k} must be < n = {n}")));
    }
    let lo = 0.5 - theta;
    let hi = 0.5 + theta;
    let p = log_convolve(&binomial_log_pmf(1 + k, lo)?, &binomial_log_pmf(n - k - 1, hi)?);
    let q = log_convolve(&binomial_log_pmf(k, lo)?, &binomial_log_pmf(n - k, hi)?);
    Ok((p, q))
}

/// Exact Rényi DP of PBM with `n` clients and `m` trials. Refuses
/// `m·n > 10^7`.
pub fn pbm_rdp_exact(n: u64, m: u64, theta: f64, alpha: f64) -> Result<f64> {
    let (p1, p2) = pbm_exact_pair(n, m, theta)?;
    Ok(renyi_divergence(&p1, &p2, alpha))
}

/// Exact curve over `alphas`, sharing one pmf computation.
pub fn pbm_rdp_exact_curve(n: u64, m: u64, theta: f64, alphas: &[f64]) -> Result<RdpCurve> {
    let (p1, p2) = pbm_exact_pair(n, m, theta)?;
    RdpCurve::from_fn(alphas, |a| renyi_divergence(&p1, &p2, a))
}

/// O(n) upper bound on the Rényi DP of PBM: `m` times the divergence of a
/// single-trial mechanism.
pub fn pbm_rdp_approx(n: u64, m: u64, theta: f64, alpha: f64) -> Result<f64> {
    let (p, q) = pbm_approx_pair(n, theta, n - 1)?;
    Ok(m as f64 * renyi_divergence(&p, &q, alpha))
}

pub fn pbm_rdp_approx_curve(n: u64, m: u64, theta: f64, alphas: &[f64]) -> Result<RdpCurve> {
    let (p, q) = pbm_approx_pair(n, theta, n.max(2) - 1)?;
    RdpCurve::from_fn(alphas, |a| m as f64 * renyi_divergence(&p, &q, a))
}

/// Maximum of the data-processing bound over configurations at both ends of
/// `0..n`, `k ∈ {0..=K} ∪ {n-1-K..=n-1}` with `K = min(n-1, max_offset)`.
/// Returns the maximum and the `k` that attains it.
pub fn pbm_rdp_approx_sweep(n: u64, m: u64, theta: f64, alpha: f64, max_offset: u64) -> Result<(f64, u64)> {
    check_pbm_inputs(n, theta)?;
    let span = max_offset.min(n - 1);
    let mut ks: Vec<u64> = (0..=span).chain((n - 1 - span)..n).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut best = (f64::NEG_INFINITY, 0);
    for k in ks {
        let (p, q) = pbm_approx_pair(n, theta, k)?;
        let d = m as f64 * renyi_divergence(&p, &q, alpha);
        if d > best.0 {
            best = (d, k);
        }
    }
    Ok(best)
}

/// Rényi DP of the Gaussian mechanism: `α Δ² / (2σ²)`.
pub fn gaussian_rdp_curve(sensitivity: f64, sigma: f64, alphas: &[f64]) -> Result<RdpCurve> {
    let rho = sensitivity * sensitivity / (2.0 * sigma * sigma);
    RdpCurve::from_fn(alphas, |a| a * rho)
}

/// Sequential composition: pointwise sum on a shared grid.
pub fn compose(curves: &[RdpCurve]) -> Result<RdpCurve> {
    let first = curves.first().ok_or_else(|| Error::Config("nothing to compose".into()))?;
    let mut points = first.points.clone();
    for c in &curves[1..] {
        check_same_grid(first, c)?;
        for (acc, p) in points.iter_mut().zip(&c.points) {
            acc.1 += p.1;
        }
    }
    Ok(RdpCurve { points })
}

/// Converts a Rényi-DP curve to `(ε, δ)`-DP:
/// `min_α ε(α) + log(1/(αδ))/(α-1) + log(1 - 1/α)`, clamped at zero.
pub fn rdp_to_dp(curve: &RdpCurve, delta: f64) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::Config("cannot convert an empty RDP curve".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
    }
    let eps = curve
        .points
        .iter()
        .map(|&(a, e)| e + (1.0 / (a * delta)).ln() / (a - 1.0) + (1.0 - 1.0 / a).ln())
        .fold(f64::INFINITY, f64::min);
    Ok(eps.max(0.0))
}
