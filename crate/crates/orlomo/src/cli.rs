//! Command-line front end.
//!
//! The binary only parses arguments and reads `ORLOMO_SEED`; everything else
//! lives here so tests can drive the commands in-process.

use crate::config::{SimConfig, SweepConfig, SEED_ENV};
use crate::error::{Error, Result};
use crate::oracle::{verify_trace, VerificationReport};
use crate::problems::ProblemSpec;
use crate::simulator::{run, RunTrace, TRACE_FORMAT};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "orlomo", version, about = "Asynchronous local momentum SGD simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation.
    Run {
        config: PathBuf,
        /// Write the full trace (JSON container) here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the metrics CSV here (default: `<config stem>.metrics.csv` beside the config).
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Verify a trace, or run a config with full diagnostics and verify the result.
    Verify {
        input: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run every cell of a sweep grid.
    Sweep {
        sweep: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the materialised problem instance as JSON.
    DumpProblem { config: PathBuf },
}

/// Exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Parse(_) | Error::Io(_) | Error::DimensionMismatch { .. } => {
            EXIT_CONFIG
        }
        Error::NumericFailure { .. } | Error::Protocol(_) => EXIT_NUMERIC,
        Error::Unsupported(_) | Error::TraceCorruption(_) | Error::InsufficientDiagnostics(_) => {
            EXIT_VERIFY
        }
    }
}

/// Reads the seed override from the environment.
pub fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::config(SEED_ENV, format!("`{s}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<SimConfig> {
    let cfg = SimConfig::from_path(path)?;
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn default_metrics_path(config: &Path) -> PathBuf {
    let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    config.with_file_name(format!("{stem}.metrics.csv"))
}

/// `orlomo run`.
pub fn cmd_run(
    config: &Path,
    trace_out: Option<&Path>,
    metrics_out: Option<&Path>,
    seed: Option<u64>,
    out: &mut dyn Write,
) -> Result<i32> {
    let cfg = load_config(config, seed)?;
    let outputs = cfg.output.clone().unwrap_or(crate::config::OutputPaths {
        metrics: None,
        trace: None,
    });
    let trace = run(&cfg)?;
    let metrics_path = metrics_out
        .map(Path::to_path_buf)
        .or(outputs.metrics)
        .unwrap_or_else(|| default_metrics_path(config));
    trace.write_csv(&metrics_path)?;
    if let Some(p) = trace_out.map(Path::to_path_buf).or(outputs.trace) {
        trace.write_json(&p)?;
    }
    writeln!(
        out,
        "{} K={} S={} T={} final_loss={:e} final_grad_norm_sq={:e} sim_time={}",
        cfg.algorithm.name(),
        cfg.workers,
        cfg.local_steps,
        trace.len(),
        trace.final_loss,
        trace.final_grad_norm_sq,
        trace.wall_clock()
    )?;
    Ok(EXIT_OK)
}

/// Loads a trace container, or runs a config with every iterate evaluated.
pub fn trace_for_verification(input: &Path, seed: Option<u64>) -> Result<RunTrace> {
    let text = std::fs::read_to_string(input)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", input.display())))?;
    if value.get("format").and_then(|f| f.as_str()) == Some(TRACE_FORMAT) {
        return RunTrace::from_json(&text);
    }
    let mut cfg = SimConfig::from_json_str(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.diagnostics_every = Some(1);
    run(&cfg)
}

/// `orlomo verify`. Returns 0 iff every check passed.
pub fn cmd_verify(
    input: &Path,
    report_out: Option<&Path>,
    seed: Option<u64>,
    out: &mut dyn Write,
) -> Result<i32> {
    let trace = trace_for_verification(input, seed)?;
    let report = verify_trace(&trace)?;
    write_report(&report, report_out, out)?;
    Ok(if report.pass { EXIT_OK } else { EXIT_VERIFY })
}

fn write_report(report: &VerificationReport, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let json = report.to_json_pretty();
    match path {
        Some(p) => crate::simulator::write_atomic(p, json.as_bytes())?,
        None => writeln!(out, "{json}")?,
    }
    for c in &report.checks {
        writeln!(
            out,
            "{} {:<24} max_rel_dev={:.3e} excluded={}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.max_rel_dev,
            c.excluded
        )?;
    }
    Ok(())
}

/// One line of a sweep summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub key: String,
    pub seed: u64,
    pub iterations: usize,
    pub gradient_samples: u64,
    pub final_loss: f64,
    pub final_grad_norm_sq: f64,
    pub wall_clock: f64,
    pub max_delay: usize,
}

pub const SUMMARY_HEADER: &str =
    "cell,seed,iterations,gradient_samples,final_loss,final_grad_norm_sq,wall_clock,max_delay,status";

/// `orlomo sweep`. Cells run in parallel; each writes its own directory.
pub fn cmd_sweep(sweep: &Path, out_dir: &Path, seed: Option<u64>, out: &mut dyn Write) -> Result<i32> {
    let mut grid = SweepConfig::from_path(sweep)?;
    if let Some(s) = seed {
        grid.base.seed = s;
    }
    let cells = grid.cells()?;
    std::fs::create_dir_all(out_dir)?;
    let results: Vec<(String, u64, Result<CellSummary>)> = cells
        .par_iter()
        .map(|(coords, cfg)| {
            let key = coords.key();
            let res = run_cell(&key, cfg, &out_dir.join(&key));
            (key, cfg.seed, res)
        })
        .collect();

    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    let mut status = EXIT_OK;
    for (key, cell_seed, res) in &results {
        match res {
            Ok(c) => {
                let _ = writeln!(
                    summary,
                    "{},{},{},{},{:?},{:?},{:?},{},ok",
                    c.key,
                    c.seed,
                    c.iterations,
                    c.gradient_samples,
                    c.final_loss,
                    c.final_grad_norm_sq,
                    c.wall_clock,
                    c.max_delay
                );
            }
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], ";");
                let _ = writeln!(summary, "{key},{cell_seed},,,,,,,error: {msg}");
                writeln!(out, "cell {key} failed: {e}")?;
                if status == EXIT_OK {
                    status = exit_code(e);
                }
            }
        }
    }
    crate::simulator::write_atomic(&out_dir.join("summary.csv"), summary.as_bytes())?;
    writeln!(
        out,
        "{} cells, {} failed, summary in {}",
        results.len(),
        results.iter().filter(|r| r.2.is_err()).count(),
        out_dir.join("summary.csv").display()
    )?;
    Ok(status)
}

/// Runs one sweep cell, writing `config.json` and `metrics.csv` into `dir`.
/// The written config reproduces the cell when run standalone.
pub fn run_cell(key: &str, cfg: &SimConfig, dir: &Path) -> Result<CellSummary> {
    std::fs::create_dir_all(dir)?;
    crate::simulator::write_atomic(&dir.join("config.json"), cfg.to_json_pretty().as_bytes())?;
    let trace = run(cfg)?;
    trace.write_csv(&dir.join("metrics.csv"))?;
    Ok(CellSummary {
        key: key.to_string(),
        seed: cfg.seed,
        iterations: trace.len(),
        gradient_samples: trace.gradient_samples,
        final_loss: trace.final_loss,
        final_grad_norm_sq: trace.final_grad_norm_sq,
        wall_clock: trace.wall_clock(),
        max_delay: trace.max_delay(),
    })
}

/// `orlomo dump-problem`.
pub fn cmd_dump_problem(config: &Path, seed: Option<u64>, out: &mut dyn Write) -> Result<i32> {
    let cfg = load_config(config, seed)?;
    let spec = ProblemSpec::build(&cfg.problem, cfg.seed)?;
    let json = serde_json::to_string_pretty(&spec).expect("problem serialization is infallible");
    writeln!(out, "{json}")?;
    Ok(EXIT_OK)
}

/// Executes a parsed command; errors are reported on `err` and mapped to exit codes.
pub fn execute(cli: Cli, seed: Option<u64>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Run {
            config,
            trace,
            metrics,
        } => cmd_run(config, trace.as_deref(), metrics.as_deref(), seed, out),
        Command::Verify { input, report } => cmd_verify(input, report.as_deref(), seed, out),
        Command::Sweep { sweep, out: dir } => cmd_sweep(sweep, dir, seed, out),
        Command::DumpProblem { config } => cmd_dump_problem(config, seed, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    let seed = match seed_from_env() {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code(&e);
        }
    };
    execute(cli, seed, &mut stdout, &mut stderr)
}
