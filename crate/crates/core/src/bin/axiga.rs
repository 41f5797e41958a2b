//! Command-line driver: `axiga <pillbox|source|exactness|info> [options]`.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure or a failed
//! study check.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use axiga::study::{run_study, Environment, GeometryConfig, StudyConfig, StudyKind, StudyReport};
use axiga::Error;

#[derive(Parser)]
#[command(name = "axiga", version, about = "Fourier x isogeometric Maxwell solver for axisymmetric domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pillbox cavity eigenfrequencies against the Bessel oracle.
    Pillbox(StudyArgs),
    /// Manufactured-solution convergence of the magnetostatic problem.
    Source(StudyArgs),
    /// Exactness of the discrete complex.
    Exactness(StudyArgs),
    /// Build and environment information, and the default configurations.
    Info,
}

#[derive(Args)]
struct StudyArgs {
    /// TOML study configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for results.csv, summary.json and rates.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single-threaded, deterministic run (no timings in the CSV).
    #[arg(long)]
    sequential: bool,
    #[arg(long, value_delimiter = ',')]
    degrees: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    subdivisions: Option<Vec<usize>>,
    /// Signed modes, e.g. `1,-1,2`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    modes: Option<Vec<i64>>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eigs: Option<usize>,
    /// TOML geometry file (replaces the built-in cross-section).
    #[arg(long)]
    geometry: Option<PathBuf>,
}

fn build_config(kind: StudyKind, args: StudyArgs) -> Result<StudyConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let cfg = StudyConfig::load(path)?;
            if cfg.study != kind {
                return Err(Error::Config {
                    field: "study".into(),
                    message: format!("config is for `{}` but the `{}` command was given", cfg.study.name(), kind.name()),
                });
            }
            cfg
        }
        None => StudyConfig::defaults(kind),
    };
    if let Some(v) = args.degrees {
        cfg.degrees = v;
    }
    if let Some(v) = args.subdivisions {
        cfg.subdivisions = v;
    }
    if let Some(v) = args.modes {
        cfg.modes = v;
    }
    if let Some(v) = args.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = args.eigs {
        cfg.eigs = v;
    }
    if let Some(path) = args.geometry {
        cfg.geometry = GeometryConfig { file: Some(path), ..GeometryConfig::default() };
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    cfg.sequential |= args.sequential;
    cfg.validate()?;
    Ok(cfg)
}

fn summarize(report: &StudyReport) {
    println!("{} study: {} rows, {:.2} s", report.study.name(), report.rows.len(), report.total_seconds);
    if !report.rates.is_empty() {
        print!("{}", report.rate_table());
    }
    for c in &report.checks {
        println!("{:<4} {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
}

fn run(kind: StudyKind, args: StudyArgs) -> Result<bool, Error> {
    let cfg = build_config(kind, args)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}-out", kind.name())));
    let report = run_study(&cfg)?;
    report.write(&out)?;
    summarize(&report);
    println!("wrote {}", out.display());
    Ok(report.passed())
}

fn info() {
    let env = Environment::current(false);
    println!("axiga {} ({}/{}), {} worker threads", env.version, env.os, env.arch, env.threads);
    for kind in [StudyKind::Pillbox, StudyKind::Source, StudyKind::Exactness] {
        println!("\n# default `{}` configuration", kind.name());
        print!("{}", StudyConfig::defaults(kind).to_toml_string());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Info => {
            info();
            return ExitCode::SUCCESS;
        }
        Command::Pillbox(a) => (StudyKind::Pillbox, a),
        Command::Source(a) => (StudyKind::Source, a),
        Command::Exactness(a) => (StudyKind::Exactness, a),
    };
    match run(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
