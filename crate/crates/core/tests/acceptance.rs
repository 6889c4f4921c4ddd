//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any fails. Run with `cargo test --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ddp_ate::accounting::{
    calibrate_gaussian, calibrate_suite, compose, default_alpha_grid, gaussian_rdp_curve, pbm_rdp_approx,
    pbm_rdp_approx_curve, pbm_rdp_exact, rdp_to_dp, split_budget, RdpCurve,
};
use ddp_ate::estimation::{nonasymptotic_gamma, CiKind, Combination, Estimand};
use ddp_ate::mechanism::{pbm_decode_mean, pbm_variance_bound, MechanismSuite, PbmParams};
use ddp_ate::secagg::{field_size_for, generate_masks, Group, Moment, SecAggSession};
use ddp_ate::simulation::{run_monte_carlo, ExperimentReport, OutcomeModel, Privatizer, TrialConfig};

const DELTA: f64 = 1e-5;
const SEED: u64 = 0x5eed_acce;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn wide_gaussian() -> OutcomeModel {
    OutcomeModel::TruncatedGaussian { mu_c: -0.1, mu_t: 0.1, sigma: 0.05, range: 1.0 }
}

fn trial(model: OutcomeModel, n: usize, privatizer: Privatizer, estimand: Estimand, ci_kind: CiKind) -> TrialConfig {
    TrialConfig {
        model,
        n,
        n_c: n / 2,
        privatizer,
        estimand,
        ci_kind,
        level: 0.9,
        combination: Combination::Quadrature,
    }
}

fn pbm_privatizer(eps: f64, arm: u64, m: u64) -> Privatizer {
    let (suite, _) = calibrate_suite(eps, DELTA, arm, m, m, 0.99, 1.0, &default_alpha_grid()).expect("calibration");
    Privatizer::Pbm { control: suite, treatment: suite }
}

fn gaussian_privatizer(eps: f64, arm: u64) -> Privatizer {
    let a = arm as f64;
    let sensitivity = 2.0 * (2.0 / (a * a)).sqrt();
    Privatizer::CentralGaussian(
        calibrate_gaussian(eps, DELTA, sensitivity, &default_alpha_grid()).expect("calibration"),
    )
}

fn mc(cfg: &TrialConfig, reps: u64, seed: u64) -> ExperimentReport {
    run_monte_carlo(cfg, reps, seed).expect("simulation")
}

/// PBM runs at n = 10^4 shared by the first two criteria.
struct PbmGrid {
    eps: Vec<f64>,
    pbm: Vec<ExperimentReport>,
}

fn pbm_grid(n: usize, eps: &[f64], reps: u64) -> PbmGrid {
    let pbm = eps
        .iter()
        .map(|&e| {
            mc(
                &trial(wide_gaussian(), n, pbm_privatizer(e, n as u64 / 2, 256), Estimand::Pate, CiKind::Asymptotic),
                reps,
                SEED,
            )
        })
        .collect();
    PbmGrid { eps: eps.to_vec(), pbm }
}

fn reference_check(grid: &PbmGrid, reference: &[f64]) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for ((eps, rep), want) in grid.eps.iter().zip(&grid.pbm).zip(reference) {
        let rel = rep.mean_width / want - 1.0;
        let ok = (0.88..=0.92).contains(&rep.coverage) && rel.abs() <= 0.05;
        pass &= ok;
        parts.push(format!(
            "eps={eps}: coverage {:.3}, width {:.4} vs {want} ({:+.1}%){}",
            rep.coverage,
            rep.mean_width,
            100.0 * rel,
            if ok { "" } else { " x" }
        ));
    }
    (pass, parts.join("; "))
}

fn criterion_1(grid: &PbmGrid) -> Verdict {
    let (pass, detail) = reference_check(grid, &[0.772, 0.085, 0.048]);
    verdict(pass, detail)
}

fn companion_n1000() -> String {
    let grid = pbm_grid(1000, &[0.1, 1.0, 1.9], 5000);
    reference_check(&grid, &[0.772, 0.085, 0.048]).1
}

fn criterion_2(grid: &PbmGrid) -> Verdict {
    let i = grid.eps.iter().position(|&e| e == 1.0).expect("eps = 1 in grid");
    let gauss = mc(
        &trial(wide_gaussian(), 10_000, gaussian_privatizer(1.0, 5000), Estimand::Pate, CiKind::Asymptotic),
        5000,
        SEED,
    );
    let ratio = grid.pbm[i].mean_width / gauss.mean_width;
    verdict(
        ratio <= 1.15,
        format!(
            "PBM width {:.5} / Gaussian width {:.5} = {ratio:.3} (limit 1.15)",
            grid.pbm[i].mean_width, gauss.mean_width
        ),
    )
}

fn criterion_3() -> Verdict {
    let model = OutcomeModel::TruncatedGaussian { mu_c: -0.1, mu_t: 0.1, sigma: 0.01, range: 1.0 };
    let pate = mc(&trial(model, 2000, Privatizer::NonPrivate, Estimand::Pate, CiKind::Asymptotic), 10_000, SEED);
    let sate = mc(&trial(model, 2000, Privatizer::NonPrivate, Estimand::Sate, CiKind::Asymptotic), 10_000, SEED);
    verdict(
        (pate.coverage - 0.901).abs() <= 0.02 && sate.coverage >= 0.95,
        format!("PATE coverage {:.4} (0.901 ± 0.02), SATE coverage {:.4} (>= 0.95)", pate.coverage, sate.coverage),
    )
}

fn criterion_4() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [16, 64] {
        let exact = pbm_rdp_exact(100, m, 0.25, 2.0).expect("exact");
        let approx = pbm_rdp_approx(100, m, 0.25, 2.0).expect("approx");
        let gap = approx / exact - 1.0;
        let ok = approx >= exact && gap <= 0.005;
        pass &= ok;
        parts.push(format!("m={m}: exact {exact:.6}, approx {approx:.6}, gap {:.3}%", 100.0 * gap));
    }
    verdict(pass, parts.join("; ") + " (limit 0.5%)")
}

/// Distribution of the number of successes over independent trials with the
/// given probabilities, by listing every outcome pattern.
fn enumerate_successes(probs: &[f64]) -> Vec<f64> {
    let k = probs.len();
    let mut pmf = vec![0.0; k + 1];
    for pattern in 0u32..(1 << k) {
        let mut p = 1.0;
        for (j, &q) in probs.iter().enumerate() {
            p *= if pattern >> j & 1 == 1 { q } else { 1.0 - q };
        }
        pmf[pattern.count_ones() as usize] += p;
    }
    pmf
}

fn renyi_oracle(p: &[f64], q: &[f64], alpha: f64) -> f64 {
    let s: f64 = p.iter().zip(q).map(|(a, b)| a.powf(alpha) * b.powf(1.0 - alpha)).sum();
    s.ln() / (alpha - 1.0)
}

fn criterion_5() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    // A single client has no neighbouring dataset to hide in; accounting starts at two.
    for n in 2..=4u64 {
        for m in 1..=4u64 {
            for theta in [0.05, 0.15, 0.25] {
                let all_low = vec![0.5 - theta; (n * m) as usize];
                let mut one_high = vec![0.5 - theta; (m * (n - 1)) as usize];
                one_high.extend(std::iter::repeat_n(0.5 + theta, m as usize));
                let (p, q) = (enumerate_successes(&all_low), enumerate_successes(&one_high));
                for alpha in [1.5, 2.0, 4.0] {
                    let want = renyi_oracle(&p, &q, alpha);
                    let got = pbm_rdp_exact(n, m, theta, alpha).expect("exact");
                    worst = worst.max((got - want).abs() / want.abs());
                    cases += 1;
                }
            }
        }
    }
    verdict(worst <= 1e-10, format!("{cases} cases, worst relative error {worst:.2e} (limit 1e-10)"))
}

fn binomial_pmf(m: u64, p: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m as usize + 1);
    let mut coef = 1.0;
    for k in 0..=m {
        if k > 0 {
            coef *= (m - k + 1) as f64 / k as f64;
        }
        out.push(coef * p.powi(k as i32) * (1.0 - p).powi((m - k) as i32));
    }
    out
}

fn criterion_6() -> Verdict {
    let range = 1.0;
    let grid = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let (mut bias, mut excess, mut equality_gap): (f64, f64, f64) = (0.0, f64::NEG_INFINITY, 0.0);
    let mut cases = 0;
    for theta in [0.05, 0.15, 0.25] {
        for m in 1..=8u64 {
            let params = PbmParams::new(m, theta, range).expect("params");
            for group in 1..=3u32 {
                for code in 0..5usize.pow(group) {
                    let xs: Vec<f64> = (0..group).map(|j| grid[code / 5usize.pow(j) % 5]).collect();
                    let mut pmf = vec![1.0];
                    for &x in &xs {
                        let client = binomial_pmf(m, theta * x / range + 0.5);
                        let mut next = vec![0.0; pmf.len() + m as usize];
                        for (i, a) in pmf.iter().enumerate() {
                            for (j, b) in client.iter().enumerate() {
                                next[i + j] += a * b;
                            }
                        }
                        pmf = next;
                    }
                    let n = group as u64;
                    let decoded: Vec<f64> =
                        (0..pmf.len()).map(|s| pbm_decode_mean(s as u64, n, &params).expect("decode")).collect();
                    let mean: f64 = pmf.iter().zip(&decoded).map(|(p, v)| p * v).sum();
                    let var: f64 = pmf.iter().zip(&decoded).map(|(p, v)| p * (v - mean).powi(2)).sum();
                    let truth = xs.iter().sum::<f64>() / xs.len() as f64;
                    let bound = pbm_variance_bound(&params, n);
                    bias = bias.max((mean - truth).abs());
                    excess = excess.max(var / bound - 1.0);
                    if xs.iter().all(|&x| x == 0.0) {
                        equality_gap = equality_gap.max((var / bound - 1.0).abs());
                    }
                    cases += 1;
                }
            }
        }
    }
    verdict(
        bias <= 1e-12 && excess <= 1e-12 && equality_gap <= 1e-12,
        format!(
            "{cases} cases: max |E - mean| {bias:.1e}, max Var/bound - 1 {excess:.1e}, equality gap at zero {equality_gap:.1e}"
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut failures = 0;
    for s in 0..1000u64 {
        let n = rng.random_range(1..=100usize);
        let m = rng.random_range(1..=64u64);
        let raw: Vec<u64> = (0..n).map(|_| rng.random_range(0..=m)).collect();
        let group = if rng.random_bool(0.5) { Group::Control } else { Group::Treatment };
        let moment = if rng.random_bool(0.5) { Moment::First } else { Moment::Second };
        let session = SecAggSession::new(group, moment, n, m, s).expect("session");
        let state = session.run(&raw).expect("aggregate");
        let spec = field_size_for(n as u64, m).expect("field");
        let masks = generate_masks(n, spec, s);
        let mask_total = masks.iter().fold(0u64, |acc, &r| spec.add(acc, r));
        if state.sum != raw.iter().sum::<u64>() || mask_total != 0 || masks.iter().any(|&r| r >= spec.modulus()) {
            failures += 1;
        }
    }
    verdict(failures == 0, format!("1000 sessions, {failures} failures"))
}

fn criterion_8() -> Verdict {
    let cfg = trial(wide_gaussian(), 2000, pbm_privatizer(1.0, 1000, 256), Estimand::Pate, CiKind::Nonasymptotic);
    let rep = mc(&cfg, 2000, SEED);
    // Fixed θ with m proportional to n keeps ε(α) nearly constant across n.
    let (theta1, theta2) = (0.05, 0.01);
    let mut scaled = Vec::new();
    let mut eps2 = Vec::new();
    for n in [1_000u64, 10_000, 100_000, 1_000_000] {
        let m = 64 * n / 1000;
        let suite = MechanismSuite {
            first: PbmParams::new(m, theta1, 1.0).expect("params"),
            second: PbmParams::new(m, theta2, 1.0).expect("params"),
        };
        let gamma = nonasymptotic_gamma(n, 1.0, Some(&suite), 2.0 * 0.05f64.powi(2), 0.1).expect("gamma");
        scaled.push(gamma * n as f64);
        eps2.push(pbm_rdp_approx(n / 2, m, theta1, 2.0).expect("rdp"));
    }
    let spread = scaled.iter().cloned().fold(0.0, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let eps_spread = eps2.iter().cloned().fold(0.0, f64::max) / eps2.iter().cloned().fold(f64::INFINITY, f64::min);
    verdict(
        rep.coverage >= 0.90 && spread <= 2.0 && eps_spread <= 1.01,
        format!(
            "coverage {:.4} (>= 0.90); gamma*n over n=1e3..1e6: {} (max/min {spread:.3}, limit 2); eps1(2) max/min {eps_spread:.4}",
            rep.coverage,
            scaled.iter().map(|v| format!("{v:.1}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion_9() -> Verdict {
    let alphas = default_alpha_grid();
    let mut totals: Vec<RdpCurve> = Vec::new();
    for (n, m, theta) in [(500u64, 256u64, 0.01), (5000, 256, 0.2), (1000, 16, 0.25), (50, 64, 0.05)] {
        totals.push(pbm_rdp_approx_curve(n, m, theta, &alphas).expect("curve"));
    }
    totals.push(gaussian_rdp_curve(1.0, 3.0, &alphas).expect("curve"));
    let mut worst_excess = f64::NEG_INFINITY;
    let mut exact_addition = true;
    for total in &totals {
        let split = split_budget(total, 0.99).expect("split");
        let composed = compose(&[split.first.clone(), split.second.clone()]).expect("compose");
        for (((_, c), (_, a)), (_, b)) in composed.points().iter().zip(split.first.points()).zip(split.second.points())
        {
            exact_addition &= *c == a + b;
        }
        for delta in [1e-3, 1e-5, 1e-7, 1e-9] {
            let excess = rdp_to_dp(&composed, delta).unwrap() - rdp_to_dp(total, delta).unwrap();
            worst_excess = worst_excess.max(excess);
        }
    }
    // The calibrated two-moment suite also stays within its target.
    for eps in [0.1, 0.5, 1.0, 1.9] {
        for delta in [1e-5, 1e-7] {
            let (suite, _) = calibrate_suite(eps, delta, 1000, 256, 256, 0.99, 1.0, &alphas).expect("calibration");
            let curve = compose(&[
                pbm_rdp_approx_curve(1000, 256, suite.first.theta(), &alphas).unwrap(),
                pbm_rdp_approx_curve(1000, 256, suite.second.theta(), &alphas).unwrap(),
            ])
            .unwrap();
            worst_excess = worst_excess.max(rdp_to_dp(&curve, delta).unwrap() - eps);
        }
    }
    verdict(
        worst_excess <= 1e-9 && exact_addition,
        format!("worst converted excess {worst_excess:.2e} (limit 1e-9); pointwise addition exact: {exact_addition}"),
    )
}

fn canned_configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .expect("configs directory")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    files
}

fn simulate(config: &Path, out: &Path, threads: usize) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_ddp-ate"))
        .args(["simulate", "--replications", "40", "--seed", "11", "--threads", &threads.to_string(), "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .status()
        .expect("spawn ddp-ate");
    assert!(status.success(), "simulate failed on {}", config.display());
    std::fs::read(out).expect("report")
}

fn criterion_10() -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut differing = Vec::new();
    let configs = canned_configs();
    for (i, cfg) in configs.iter().enumerate() {
        let a = simulate(cfg, &dir.path().join(format!("{i}_a.csv")), 1);
        let b = simulate(cfg, &dir.path().join(format!("{i}_b.csv")), 4);
        if a != b || a.is_empty() {
            differing.push(cfg.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    verdict(
        differing.is_empty() && !configs.is_empty(),
        format!("{} canned configs with --threads 1 vs 4; differing: {:?}", configs.len(), differing),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Verdict, f64)> = Vec::new();
    let mut record = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        let secs = start.elapsed().as_secs_f64();
        println!("[{}] criterion {id:>2}: {name}: {} ({secs:.1}s)", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((id, name, v, secs));
    };

    let start = Instant::now();
    let grid = pbm_grid(10_000, &[0.1, 1.0, 1.9], 5000);
    println!("[INFO] PBM runs at n=10^4 took {:.1}s", start.elapsed().as_secs_f64());
    record(1, "PBM m=256 intervals at n=10^4", &mut || criterion_1(&grid));
    println!("[INFO] criterion  1 companion at n=10^3: {}", companion_n1000());
    record(2, "PBM vs central Gaussian width at eps=1", &mut || criterion_2(&grid));
    record(3, "non-private PATE and SATE coverage", &mut criterion_3);
    record(4, "approximate accountant tightness", &mut criterion_4);
    record(5, "exact accountant vs enumeration", &mut criterion_5);
    record(6, "decoder bias and variance by enumeration", &mut criterion_6);
    record(7, "secure aggregation is lossless", &mut criterion_7);
    record(8, "non-asymptotic interval coverage and gamma scaling", &mut criterion_8);
    record(9, "composition and budget split", &mut criterion_9);
    record(10, "CLI output independent of thread count", &mut criterion_10);

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria passed; failed: {:?}", results.len() - failed.len(), results.len(), failed);
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
