//! `primespan`: scan prime counts in interval ensembles, simulate the
//! Cramér baseline, fit the variance parametrizations and write the
//! replication report.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/guard error, 3 fit
//! non-convergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use primespan_cli::config::{parse_config_file, parse_integer, Preset, ScanConfig};
use primespan_cli::fitcmd::{render_text, report_rows, run_fit, write_report_csv};
use primespan_cli::report::build_report;
use primespan_cli::rows::{read_rows, sidecar_path, write_rows, write_skips, Source};
use primespan_cli::scan::run_scan;

#[derive(Parser)]
#[command(
    name = "primespan",
    version,
    about = "Prime counts in short intervals: scans, Cramér baseline, variance fits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// Key-value config file (key = value, one per line, # comments).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of intervals per set.
    #[arg(long, value_parser = parse_integer)]
    m: Option<u64>,
    /// Interval lengths, comma-separated (e.g. 200,1000,1e4).
    #[arg(long, value_delimiter = ',', value_parser = parse_integer)]
    h: Option<Vec<u64>>,
    /// First N of the geometric grid (accepts 1e8 style).
    #[arg(long, value_parser = parse_integer)]
    n_start: Option<u64>,
    /// Last N of the geometric grid.
    #[arg(long, value_parser = parse_integer)]
    n_end: Option<u64>,
    /// Number of grid points.
    #[arg(long)]
    n_points: Option<u32>,
    /// RNG seed (Cramér runs).
    #[arg(long, value_parser = parse_integer)]
    seed: Option<u64>,
    /// Output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Preset: sample-i, sample-ii, sample-iii, sample-i-desk, custom.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Count real primes over the (h, N) grid and write scan rows.
    Scan(CommonOpts),
    /// Simulate the Cramér model over the grid and write scan rows.
    Cramer {
        #[command(flatten)]
        common: CommonOpts,
        /// Bernoulli probability mode: exact (q = 1/log x) or frozen
        /// (q = 1/log N).
        #[arg(long)]
        q_mode: Option<String>,
    },
    /// Fit the scan rows: per-family linear fits, slope law, consistency
    /// regression, predictor residuals.
    Fit {
        #[command(flatten)]
        common: CommonOpts,
        /// Scan CSV to fit (also config key scan_csv).
        scan_csv: Option<PathBuf>,
        /// Lower h cut for slope-law points.
        #[arg(long)]
        alpha_h_min: Option<u64>,
        /// Also run the α₁ ≡ 1 constrained fit variant.
        #[arg(long)]
        constrain_alpha1: bool,
    },
    /// Combine a prime scan and a Cramér scan into a replication report.
    Report {
        #[command(flatten)]
        common: CommonOpts,
        /// Prime-source scan CSV (also config key prime_csv).
        prime_csv: Option<PathBuf>,
        /// Cramér-source scan CSV (also config key cramer_csv).
        cramer_csv: Option<PathBuf>,
        /// Lower h cut for slope-law points.
        #[arg(long)]
        alpha_h_min: Option<u64>,
        /// Also run the α₁ ≡ 1 constrained fit variant.
        #[arg(long)]
        constrain_alpha1: bool,
    },
}

/// Loads the config file (if given) and applies CLI overrides.
fn resolve_config(common: &CommonOpts) -> Result<ScanConfig> {
    let mut cfg = match &common.config {
        Some(path) => parse_config_file(path)?,
        None => ScanConfig::default(),
    };
    if let Some(preset) = &common.preset {
        let preset = match preset.as_str() {
            "sample-i" => Preset::SampleI,
            "sample-ii" => Preset::SampleII,
            "sample-iii" => Preset::SampleIII,
            "sample-i-desk" | "desk" => Preset::SampleIDesk,
            "custom" => Preset::Custom,
            other => return Err(anyhow!("unknown preset '{other}'")),
        };
        cfg.apply_preset(preset);
    }
    if let Some(m) = common.m {
        cfg.m = m;
    }
    if let Some(h) = &common.h {
        cfg.h_list = h.clone();
    }
    if let Some(v) = common.n_start {
        cfg.n_start = v;
    }
    if let Some(v) = common.n_end {
        cfg.n_end = v;
    }
    if let Some(v) = common.n_points {
        cfg.n_points = v;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = &common.out {
        cfg.out = Some(v.display().to_string());
    }
    Ok(cfg)
}

fn cmd_scan(common: &CommonOpts, source: Source, q_mode: Option<&str>) -> Result<()> {
    let mut cfg = resolve_config(common)?;
    if let Some(mode) = q_mode {
        cfg.q_mode = match mode {
            "exact" => primespan::cramer::QMode::Exact,
            "frozen" => primespan::cramer::QMode::Frozen,
            other => return Err(anyhow!("unknown q_mode '{other}'")),
        };
    }
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| anyhow!("no output path: pass --out or set out in the config"))?;
    let out = Path::new(&out);
    let outcome = run_scan(&cfg, source)?;
    write_rows(out, &outcome.rows)?;
    write_skips(&sidecar_path(out), &outcome.skipped)?;
    eprintln!(
        "{}: wrote {} rows to {} ({} skipped)",
        source,
        outcome.rows.len(),
        out.display(),
        outcome.skipped.len()
    );
    Ok(())
}

fn cmd_fit(
    common: &CommonOpts,
    scan_csv: Option<&Path>,
    alpha_h_min: Option<u64>,
    constrain_alpha1: bool,
) -> Result<()> {
    let cfg = resolve_config(common)?;
    let input = scan_csv
        .map(|p| p.to_path_buf())
        .or_else(|| cfg.scan_csv.as_ref().map(PathBuf::from))
        .ok_or_else(|| anyhow!("no scan CSV: pass a path or set scan_csv in the config"))?;
    let rows = read_rows(&input)?;
    if rows.is_empty() {
        return Err(anyhow!("{} holds no rows", input.display()));
    }
    let report = run_fit(
        &rows,
        alpha_h_min.unwrap_or(cfg.alpha_h_min),
        constrain_alpha1 || cfg.constrain_alpha1,
    )?;
    print!("{}", render_text(&report));
    if let Some(out) = &cfg.out {
        write_report_csv(Path::new(out), &report_rows(&report))?;
        eprintln!("fit: wrote machine-readable report to {out}");
    }
    Ok(())
}

fn cmd_report(
    common: &CommonOpts,
    prime_csv: Option<&Path>,
    cramer_csv: Option<&Path>,
    alpha_h_min: Option<u64>,
    constrain_alpha1: bool,
) -> Result<()> {
    let cfg = resolve_config(common)?;
    let prime_path = prime_csv
        .map(|p| p.to_path_buf())
        .or_else(|| cfg.prime_csv.as_ref().map(PathBuf::from))
        .ok_or_else(|| anyhow!("no prime CSV: pass a path or set prime_csv in the config"))?;
    let cramer_path = cramer_csv
        .map(|p| p.to_path_buf())
        .or_else(|| cfg.cramer_csv.as_ref().map(PathBuf::from));
    let prime_rows = read_rows(&prime_path)?;
    if prime_rows.is_empty() {
        return Err(anyhow!("{} holds no rows", prime_path.display()));
    }
    let cramer_rows = match &cramer_path {
        Some(path) => read_rows(path)?,
        None => Vec::new(),
    };
    let report = build_report(
        &prime_rows,
        &cramer_rows,
        alpha_h_min.unwrap_or(cfg.alpha_h_min),
        constrain_alpha1 || cfg.constrain_alpha1,
    )?;
    match &cfg.out {
        Some(out) => {
            std::fs::write(out, &report.text).with_context(|| format!("cannot write {out}"))?;
            eprintln!("report: wrote {out}");
        }
        None => print!("{}", report.text),
    }
    if report.checks.iter().any(|c| !c.passed) {
        eprintln!("report: some verdicts FAILED (see report body)");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Scan(common) => cmd_scan(common, Source::Primes, None),
        Command::Cramer { common, q_mode } => cmd_scan(common, Source::Cramer, q_mode.as_deref()),
        Command::Fit {
            common,
            scan_csv,
            alpha_h_min,
            constrain_alpha1,
        } => cmd_fit(common, scan_csv.as_deref(), *alpha_h_min, *constrain_alpha1),
        Command::Report {
            common,
            prime_csv,
            cramer_csv,
            alpha_h_min,
            constrain_alpha1,
        } => cmd_report(
            common,
            prime_csv.as_deref(),
            cramer_csv.as_deref(),
            *alpha_h_min,
            *constrain_alpha1,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help/version requests are not usage errors.
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = if err
                .downcast_ref::<primespan::Error>()
                .is_some_and(|e| matches!(e, primespan::Error::NonConvergence { .. }))
            {
                3
            } else {
                2
            };
            ExitCode::from(code)
        }
    }
}
