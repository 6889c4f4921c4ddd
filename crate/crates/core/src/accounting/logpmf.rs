//! Probability mass functions on `{0, …, K}` stored as natural logs.

use crate::error::{Error, Result};

/// Log-probabilities over the support `{0, …, K}`. Entries may be `-∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPmf {
    log_probs: Vec<f64>,
}

impl LogPmf {
    /// Wraps raw log-probabilities without checking normalization.
    pub fn from_log_probs(log_probs: Vec<f64>) -> Self {
        Self { log_probs }
    }

    /// Point mass at zero, the identity for [`log_convolve`].
    pub fn point_mass() -> Self {
        Self { log_probs: vec![0.0] }
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    /// `log Σ_k exp(log p_k)`; zero for a normalized pmf.
    pub fn log_total(&self) -> f64 {
        logsumexp(&self.log_probs)
    }
}

/// Numerically stable `log Σ exp(x_i)`. Returns `-∞` for an empty slice or
/// when every entry is `-∞`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

// Stirling remainder log(n!) - log(sqrt(2πn) (n/e)^n) for n = 0..=15.
const STIRLERR_TABLE: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258_219_67,
    0.041_340_695_955_409_294_093_82,
    0.027_677_925_684_998_339_148_79,
    0.020_790_672_103_765_093_111_52,
    0.016_644_691_189_821_192_163_19,
    0.013_876_128_823_070_747_998_75,
    0.011_896_709_945_891_770_095_06,
    0.010_411_265_261_972_096_497_48,
    0.009_255_462_182_712_732_917_729,
    0.008_330_563_433_362_871_256_469,
    0.007_573_675_487_951_840_794_972,
    0.006_942_840_107_209_529_865_664,
    0.006_408_994_188_004_207_068_44,
    0.005_951_370_112_758_847_735_624,
    0.005_554_733_551_962_801_371_039,
];

fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15 {
        return STIRLERR_TABLE[n as usize];
    }
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x log(x/np) + np - x`, evaluated by series when `x ≈ np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `log P(Binomial(n, p) = x)` by the saddle-point expansion of the
/// log-gamma terms, accurate to a few ulps even for `n ~ 10^7`.
fn binomial_log_term(x: u64, n: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    let nf = n as f64;
    if x == 0 {
        if n == 0 {
            return 0.0;
        }
        return if p < 0.1 { -bd0(nf, nf * q) - nf * p } else { nf * q.ln() };
    }
    if x == n {
        return if q < 0.1 { -bd0(nf, nf * p) - nf * q } else { nf * p.ln() };
    }
    let xf = x as f64;
    let yf = (n - x) as f64;
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(xf, nf * p) - bd0(yf, nf * q);
    let lf = (2.0 * std::f64::consts::PI).ln() + xf.ln() + (-xf / nf).ln_1p();
    lc - 0.5 * lf
}

/// Log-pmf of `Binomial(K, p)` for `0 < p < 1`.
pub fn binomial_log_pmf(trials: u64, p: f64) -> Result<LogPmf> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::DegenerateDistribution(p));
    }
    let log_probs = (0..=trials).map(|k| binomial_log_term(k, trials, p)).collect();
    Ok(LogPmf { log_probs })
}

/// Log-space convolution: entry `k` is `logsumexp_{i+j=k}(a_i + b_j)`.
///
/// Direct `O(|a|·|b|)` evaluation; each output is shifted by its own maximum
/// term so no intermediate underflows.
pub fn log_convolve(a: &LogPmf, b: &LogPmf) -> LogPmf {
    if a.is_empty() || b.is_empty() {
        return LogPmf { log_probs: Vec::new() };
    }
    // Iterate over the shorter operand in the inner loop.
    let (long, short) =
        if a.len() >= b.len() { (a.log_probs(), b.log_probs()) } else { (b.log_probs(), a.log_probs()) };
    let out_len = long.len() + short.len() - 1;
    let mut out = Vec::with_capacity(out_len);
    for k in 0..out_len {
        let j_lo = k.saturating_sub(long.len() - 1);
        let j_hi = k.min(short.len() - 1);
        let mut max = f64::NEG_INFINITY;
        for j in j_lo..=j_hi {
            max = max.max(short[j] + long[k - j]);
        }
        if max == f64::NEG_INFINITY {
            out.push(f64::NEG_INFINITY);
            continue;
        }
        let s: f64 = (j_lo..=j_hi).map(|j| (short[j] + long[k - j] - max).exp()).sum();
        out.push(max + s.ln());
    }
    LogPmf { log_probs: out }
}
