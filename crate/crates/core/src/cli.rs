//! Command-line front end: `price`, `density`, `simulate` and `check`.
//!
//! Exit codes: 0 success, 2 invalid input, 3 failed numerical check, 4 I/O.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::density::log_price_density;
use crate::error::{Error, Result};
use crate::mc::{martingale_estimate, price_mc, McEstimate};
use crate::pricing::{format_significant, price, CheckResult, PriceReport, Route};

/// Significant digits of printed prices.
pub const PRICE_DIGITS: usize = 8;

/// Tolerance of the density normalization check.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "kfpide",
    version,
    about = "Jump-diffusion transition densities and option prices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price the configured contract.
    Price(PriceArgs),
    /// Tabulate the log-price transition density as CSV.
    Density(DensityArgs),
    /// Monte Carlo estimate as a CSV row.
    Simulate(SimulateArgs),
    /// Run the invariant checks for a configuration.
    Check(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fail on any check or edge violation (default).
    #[arg(long, conflicts_with = "relaxed")]
    strict: bool,
    /// Report check failures without failing the run.
    #[arg(long)]
    relaxed: bool,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PriceArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value = "auto", value_parser = ["auto", "series", "quadrature"])]
    route: String,
    /// Run route-agreement, martingale and parity checks.
    #[arg(long)]
    check: bool,
    #[arg(long)]
    json: bool,
    /// Price every `*.ini` file in this directory concurrently.
    #[arg(long, conflicts_with = "config")]
    batch: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DensityArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Start time (defaults to `contract.valuation_time`).
    #[arg(long)]
    s: Option<f64>,
    /// End time (defaults to `contract.maturity`).
    #[arg(long)]
    t: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(stderr, "{e}")
            } else {
                write!(stdout, "{e}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Price(a) => cmd_price(&a, stdout),
        Command::Density(a) => cmd_density(&a, stdout),
        Command::Simulate(a) => cmd_simulate(&a, stdout),
        Command::Check(a) => cmd_check(&a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn load(common: &CommonArgs) -> Result<RunConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    load_path(path, common)
}

fn load_path(path: &Path, common: &CommonArgs) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let mut overrides = Vec::new();
    if let Some(seed) = common.seed {
        overrides.push(("mc.seed", seed.to_string()));
    }
    if common.relaxed {
        overrides.push(("numerics.strict", "false".to_string()));
    } else if common.strict {
        overrides.push(("numerics.strict", "true".to_string()));
    }
    RunConfig::from_str_with_overrides(&text, &overrides)
}

fn strict(cfg: &RunConfig) -> bool {
    cfg.numerics.strictness == crate::grid::Strictness::Strict
}

/// Shortest round-trip rendering, scientific outside `[1e-4, 1e15)`;
/// NaN is written `nan`.
pub fn number(x: f64) -> String {
    let a = x.abs();
    if x.is_nan() {
        "nan".into()
    } else if a == 0.0 || (1e-4..1e15).contains(&a) || a.is_infinite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn emit(out: &Option<PathBuf>, stdout: &mut dyn Write, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn check_lines(checks: &[CheckResult]) -> String {
    checks
        .iter()
        .map(|c| {
            format!(
                "check.{}={} tolerance={} {}\n",
                c.name,
                number(c.value),
                number(c.tolerance),
                if c.passed { "pass" } else { "FAIL" }
            )
        })
        .collect()
}

fn config_lines(cfg: &RunConfig) -> String {
    cfg.resolved
        .iter()
        .map(|(k, v, default)| {
            format!(
                "config.{k}={v}{}\n",
                if *default { " (default)" } else { "" }
            )
        })
        .collect()
}

fn report_text(report: &PriceReport, cfg: &RunConfig) -> String {
    let mut s = format!("price={}\n", format_significant(report.price, PRICE_DIGITS));
    s += &format!("route={}\n", report.route);
    s += &format!("knocked_out={}\n", report.knocked_out);
    s += &format!("truncation_index={}\n", report.truncation_index);
    s += &format!("tail_mass={}\n", number(report.tail_mass));
    match report.grid {
        Some([lo, hi, n]) => s += &format!("grid={},{},{}\n", number(lo), number(hi), n),
        None => s += "grid=none\n",
    }
    s += &check_lines(&report.checks);
    s += &config_lines(cfg);
    s
}

#[derive(Serialize)]
struct JsonReport<'a> {
    #[serde(flatten)]
    report: &'a PriceReport,
    config: Vec<(&'a str, &'a str, bool)>,
}

fn report_json(report: &PriceReport, cfg: &RunConfig) -> String {
    let j = JsonReport {
        report,
        config: cfg
            .resolved
            .iter()
            .map(|(k, v, d)| (k.as_str(), v.as_str(), *d))
            .collect(),
    };
    serde_json::to_string_pretty(&j).expect("report serializes") + "\n"
}

/// Report text, exit code and rendered price.
fn price_one(cfg: &RunConfig, args: &PriceArgs) -> Result<(String, i32, String)> {
    let route: Route = args.route.parse()?;
    let report = price(
        &cfg.model,
        &cfg.contract,
        &cfg.pricing_settings(route, args.check),
    )?;
    let text = if args.json {
        report_json(&report, cfg)
    } else {
        report_text(&report, cfg)
    };
    let code = if !report.all_checks_passed() && strict(cfg) {
        3
    } else {
        0
    };
    Ok((text, code, format_significant(report.price, PRICE_DIGITS)))
}

fn cmd_price(args: &PriceArgs, stdout: &mut dyn Write) -> Result<i32> {
    if let Some(dir) = &args.batch {
        return cmd_price_batch(dir, args, stdout);
    }
    let cfg = load(&args.common)?;
    let (text, code, _) = price_one(&cfg, args)?;
    emit(&args.common.out, stdout, &text)?;
    Ok(code)
}

/// Prices every `*.ini` file of `dir` concurrently. Each report goes to
/// `<out or dir>/<stem>.price`; stdout gets one `file,price,exit_code` row
/// per file in name order.
fn cmd_price_batch(dir: &Path, args: &PriceArgs, stdout: &mut dyn Write) -> Result<i32> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ini"))
        .collect();
    files.sort();
    let out_dir = args.common.out.clone().unwrap_or_else(|| dir.to_path_buf());
    fs::create_dir_all(&out_dir)?;
    let results: Vec<(String, String, i32)> = files
        .par_iter()
        .map(|path| {
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let outcome = load_path(path, &args.common).and_then(|cfg| price_one(&cfg, args));
            let (text, code, price) = match outcome {
                Ok(v) => v,
                Err(e) => (format!("error: {e}\n"), e.exit_code(), "nan".into()),
            };
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let code = match fs::write(out_dir.join(format!("{stem}.price")), text) {
                Ok(()) => code,
                Err(_) => 4,
            };
            (name, price, code)
        })
        .collect();
    let mut worst = 0;
    writeln!(stdout, "file,price,exit_code")?;
    for (name, price, code) in results {
        writeln!(stdout, "{name},{price},{code}")?;
        worst = worst.max(code);
    }
    Ok(worst)
}

fn density_csv(cfg: &RunConfig, s: f64, t: f64) -> Result<String> {
    if !(t > s) {
        return Err(Error::Domain(format!(
            "density needs t > s, got s = {s}, t = {t}"
        )));
    }
    let settings = cfg.pricing_settings(Route::Auto, false);
    let grid = settings.grid_for(&cfg.model, t - s)?;
    let d = log_price_density(&cfg.model, s, t, &grid, &cfg.numerics.truncation)?;
    let mut csv = String::with_capacity(grid.len() * 48);
    csv.push_str("y,density,atom_mass\n");
    for ((k, c), a) in d.continuous().iter().enumerate().zip(d.atom_mass()) {
        csv.push_str(&format!(
            "{},{},{}\n",
            number(grid.node(k)),
            number(*c),
            number(a)
        ));
    }
    Ok(csv)
}

fn cmd_density(args: &DensityArgs, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = load(&args.common)?;
    let s = args.s.unwrap_or(cfg.contract.valuation_time);
    let t = args.t.unwrap_or(cfg.contract.maturity);
    let csv = density_csv(&cfg, s, t)?;
    emit(&args.common.out, stdout, &csv)?;
    Ok(0)
}

/// `estimate,std_error,n_paths,seed` header and row.
pub fn simulate_csv(e: &McEstimate) -> String {
    format!(
        "estimate,std_error,n_paths,seed\n{},{},{},{}\n",
        number(e.estimate),
        number(e.std_error),
        e.n_paths,
        e.seed
    )
}

fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = load(&args.common)?;
    let e = price_mc(&cfg.model, &cfg.contract, &cfg.mc)?;
    emit(&args.common.out, stdout, &simulate_csv(&e))?;
    Ok(0)
}

fn cmd_check(args: &CommonArgs, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = load(args)?;
    let mut checks: Vec<CheckResult> = Vec::new();
    let report = price(
        &cfg.model,
        &cfg.contract,
        &cfg.pricing_settings(Route::Auto, true),
    )?;
    checks.extend(report.checks.iter().cloned());

    let tau = cfg.contract.tau();
    let settings = cfg.pricing_settings(Route::Auto, false);
    let grid = settings.grid_for(&cfg.model, tau)?;
    let d = log_price_density(
        &cfg.model,
        cfg.contract.valuation_time,
        cfg.contract.maturity,
        &grid,
        &cfg.numerics.truncation,
    )?;
    checks.push(CheckResult {
        name: "normalization".into(),
        value: d.total_mass() - 1.0,
        tolerance: NORMALIZATION_TOLERANCE,
        passed: (d.total_mass() - 1.0).abs() <= NORMALIZATION_TOLERANCE,
    });

    let m = martingale_estimate(&cfg.model, tau, &cfg.mc)?;
    let dev = m.estimate - cfg.model.spot;
    checks.push(CheckResult {
        name: "mc_martingale".into(),
        value: dev,
        tolerance: 3.0 * m.std_error,
        passed: dev.abs() <= 3.0 * m.std_error,
    });

    let mc = price_mc(&cfg.model, &cfg.contract, &cfg.mc)?;
    let dev = report.price - mc.estimate;
    // Reflection with jumps ignores overshoot; its gap is reported only.
    let informative = report.route == crate::pricing::REFLECTION_APPROXIMATION;
    checks.push(CheckResult {
        name: if informative {
            "mc_price_gap_reported".into()
        } else {
            "mc_price".into()
        },
        value: dev,
        tolerance: 3.0 * mc.std_error,
        passed: informative || dev.abs() <= 3.0 * mc.std_error,
    });

    let text = check_lines(&checks) + &config_lines(&cfg);
    emit(&args.out, stdout, &text)?;
    let failed = checks.iter().any(|c| !c.passed);
    Ok(if failed && strict(&cfg) { 3 } else { 0 })
}
