//! Command-line interface: `account`, `calibrate`, `simulate`, `report`.

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::accounting::{
    calibrate_pbm, calibrate_suite, compose, default_alpha_grid, pbm_rdp_approx_curve, pbm_rdp_exact_curve, rdp_to_dp,
    RdpCurve, EXACT_SUPPORT_LIMIT,
};
use crate::error::{Error, Result};
use crate::parallel;
use crate::simulation::run_monte_carlo;
use config::{resolve_cells, trial_config, ResolvedRun, RunConfig};
use report::{merge_table, read_rows, write_rows, ReportRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CALIBRATION: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ddp-ate", version, about = "Treatment-effect intervals under distributed differential privacy")]
pub struct Cli {
    /// Cap on worker threads for simulations.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the base seed of a run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate Rényi DP of PBM and its (ε, δ) conversion.
    Account(AccountArgs),
    /// Find PBM scales for a target (ε, δ) and print a config fragment.
    Calibrate(CalibrateArgs),
    /// Run a Monte Carlo experiment described by a config file.
    Simulate(SimulateArgs),
    /// Merge report CSVs into a mechanism-by-epsilon table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct AccountArgs {
    /// Number of clients.
    #[arg(long)]
    n: u64,
    /// Binomial trials per client.
    #[arg(long)]
    m: u64,
    /// PBM scale in (0, 1/4].
    #[arg(long, conflicts_with = "epsilon", required_unless_present = "epsilon")]
    theta: Option<f64>,
    /// Calibrate θ to this target instead of giving it.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    /// Rényi orders (comma separated); defaults to the built-in grid.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    #[arg(long)]
    n_c: u64,
    #[arg(long)]
    n_t: u64,
    #[arg(long)]
    m1: u64,
    #[arg(long)]
    m2: u64,
    /// Share of the budget for the first moment.
    #[arg(long, default_value_t = 0.99)]
    fraction: f64,
    /// Outcome half-range R.
    #[arg(long, default_value_t = 1.0)]
    range: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; defaults to the config's `output`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the replication count.
    #[arg(long)]
    replications: Option<u64>,
    /// Record per-cell wall time (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Report CSVs written by `simulate`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::DegenerateDistribution(_) | Error::ExactTooLarge(_) => EXIT_CONFIG,
        Error::Calibration(_) => EXIT_CALIBRATION,
        _ => EXIT_RUNTIME,
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| Error::Input(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_account(a: &AccountArgs) -> Result<()> {
    let grid = if a.alpha.is_empty() { default_alpha_grid() } else { a.alpha.clone() };
    let theta = match (a.theta, a.epsilon) {
        (Some(t), _) => t,
        (None, Some(eps)) => calibrate_pbm(eps, a.delta, a.n, a.m, 1.0, &grid)?.theta(),
        (None, None) => return Err(Error::Config("give --theta or --epsilon".into())),
    };
    let approx = pbm_rdp_approx_curve(a.n, a.m, theta, &grid)?;
    let exact = match pbm_rdp_exact_curve(a.n, a.m, theta, &grid) {
        Ok(c) => Some(c),
        Err(Error::ExactTooLarge(nm)) => {
            log::warn!("m*n = {nm} exceeds {EXACT_SUPPORT_LIMIT}; omitting exact values");
            None
        }
        Err(e) => return Err(e),
    };
    let mut w = csv::Writer::from_writer(open_out(a.out.as_deref())?);
    let io = |e: csv::Error| Error::Input(e.to_string());
    // The exact column is dropped entirely when its support would be too large.
    let mut header = vec!["alpha"];
    if exact.is_some() {
        header.push("rdp_exact");
    }
    header.extend(["rdp_approx", "dp_epsilon_at_alpha"]);
    w.write_record(&header).map_err(io)?;
    for (i, &(alpha, e_approx)) in approx.points().iter().enumerate() {
        // Conversion through this single order; the reported epsilon is the minimum over rows.
        let single = RdpCurve::new(vec![(alpha, e_approx)])?;
        let mut record = vec![format!("{alpha}")];
        if let Some(c) = &exact {
            record.push(format!("{:e}", c.points()[i].1));
        }
        record.push(format!("{e_approx:e}"));
        record.push(format!("{:e}", rdp_to_dp(&single, a.delta)?));
        w.write_record(&record).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Input(e.to_string()))?;
    eprintln!(
        "theta = {theta}, delta = {}: epsilon_approx = {}{}",
        a.delta,
        rdp_to_dp(&approx, a.delta)?,
        match &exact {
            Some(c) => format!(", epsilon_exact = {}", rdp_to_dp(c, a.delta)?),
            None => String::new(),
        }
    );
    Ok(())
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<()> {
    let grid = default_alpha_grid();
    let mut thetas = Vec::new();
    let mut achieved: f64 = 0.0;
    for n in [a.n_c, a.n_t] {
        let (suite, _) = calibrate_suite(a.epsilon, a.delta, n, a.m1, a.m2, a.fraction, a.range, &grid)?;
        let curve = compose(&[
            pbm_rdp_approx_curve(n, a.m1, suite.first.theta(), &grid)?,
            pbm_rdp_approx_curve(n, a.m2, suite.second.theta(), &grid)?,
        ])?;
        achieved = achieved.max(rdp_to_dp(&curve, a.delta)?);
        thetas.push([suite.first.theta(), suite.second.theta()]);
    }
    let mut out = open_out(a.out.as_deref())?;
    let text = format!(
        "# target epsilon = {}, delta = {}, fraction = {}; achieved epsilon = {achieved}\n\
         [[mechanisms]]\nkind = \"pbm\"\nm1 = {}\nm2 = {}\ntheta_control = [{:?}, {:?}]\ntheta_treatment = [{:?}, {:?}]\n",
        a.epsilon, a.delta, a.fraction, a.m1, a.m2, thetas[0][0], thetas[0][1], thetas[1][0], thetas[1][1]
    );
    out.write_all(text.as_bytes()).map_err(|e| Error::Input(e.to_string()))
}

/// Sidecar path holding the resolved configuration of a report.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".resolved.toml");
    out.with_file_name(name)
}

fn cmd_simulate(a: &SimulateArgs, seed: Option<u64>, threads: Option<usize>) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| Error::Config(format!("{}: {e}", a.config.display())))?;
    let mut cfg = RunConfig::from_toml(&text)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(n) = a.replications {
        if n == 0 {
            return Err(Error::Config("replications: must be at least 1".into()));
        }
        cfg.replications = n;
    }
    let out_path =
        a.out.clone().or_else(|| cfg.output.as_ref().map(|o| a.config.parent().unwrap_or(Path::new(".")).join(o)));
    let cells = resolve_cells(&cfg)?;
    let mut rows = Vec::with_capacity(cells.len());
    for cell in &cells {
        let trial = trial_config(&cfg, cell)?;
        let start = Instant::now();
        let rep = parallel::with_threads(threads, || run_monte_carlo(&trial, cfg.replications, cfg.base_seed))?;
        log::info!(
            "{} at epsilon {}: coverage {:.3}, width {:.4e}",
            cell.mechanism,
            cell.epsilon,
            rep.coverage,
            rep.mean_width
        );
        rows.push(ReportRow {
            mechanism: cell.mechanism.clone(),
            epsilon: cell.epsilon,
            delta: cell.epsilon.is_finite().then_some(cfg.delta),
            m: cell.m1,
            estimand: cfg.estimand.to_string(),
            ci_kind: cfg.ci_kind.to_string(),
            coverage: rep.coverage,
            mean_width: rep.mean_width,
            width_std_err: rep.width_std_err,
            n: rep.replications,
            wall_time_s: a.timing.then(|| start.elapsed().as_secs_f64()),
        });
    }
    write_rows(&rows, open_out(out_path.as_deref())?)?;
    if let Some(p) = &out_path {
        let resolved = ResolvedRun { config: cfg, cells };
        let text = toml::to_string(&resolved).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(sidecar_path(p), text).map_err(|e| Error::Input(e.to_string()))?;
    }
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for p in &a.inputs {
        let f = File::open(p).map_err(|e| Error::Input(format!("{}: {e}", p.display())))?;
        rows.extend(read_rows(f).map_err(|e| Error::Input(format!("{}: {e}", p.display())))?);
    }
    merge_table(&rows, open_out(a.out.as_deref())?)
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Account(a) => cmd_account(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Simulate(a) => cmd_simulate(a, cli.seed, cli.threads),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
