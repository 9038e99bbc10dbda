//! Command-line orchestration: ingest corpora, scan topic counts, measure
//! stability, and report optima and metric reliability.
//!
//! Exit status is 0 on full success, 1 when some cells or datasets failed
//! (their errors are listed in a failure manifest next to the results), and 2
//! on configuration errors.

mod config;
mod curves;
mod report;
mod scan;
mod synth;

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::evaluation::EvaluationError;

pub use config::{DatasetEntry, FamilyEntry, Grid, ScanConfig, StabilitySection};
pub use curves::{read_rows, scan_curve_path, stability_curve_path, write_rows, CurveRow};
pub use report::cmd_report;
pub use scan::{cmd_ingest, cmd_scan, cmd_stability};
pub use synth::{cmd_synth, SynthArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// How a command finished when it did not abort.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Some work failed; see the failure manifest.
    Partial,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Complete => 0,
            Outcome::Partial => 1,
        }
    }
}

/// One failed unit of work. Dataset-level failures leave `family`, `topics`
/// and `seed` empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Failure {
    pub dataset: String,
    pub family: Option<String>,
    pub topics: Option<usize>,
    pub seed: Option<u64>,
    pub error: String,
}

impl Failure {
    fn dataset(name: &str, error: impl ToString) -> Self {
        Self {
            dataset: name.to_string(),
            family: None,
            topics: None,
            seed: None,
            error: error.to_string(),
        }
    }
}

pub fn failure_manifest_path(out: &Path, command: &str) -> PathBuf {
    out.join(format!("failures-{command}.json"))
}

fn finish(out: &Path, command: &str, mut failures: Vec<Failure>) -> Result<Outcome, CliError> {
    failures.sort();
    std::fs::create_dir_all(out)?;
    let path = failure_manifest_path(out, command);
    std::fs::write(&path, serde_json::to_string_pretty(&failures)? + "\n")?;
    for f in &failures {
        log::error!(
            "{command} failed: dataset={} family={} T={} seed={}: {}",
            f.dataset,
            f.family.as_deref().unwrap_or("-"),
            f.topics.map_or("-".into(), |t| t.to_string()),
            f.seed.map_or("-".into(), |s| s.to_string()),
            f.error
        );
    }
    Ok(if failures.is_empty() {
        Outcome::Complete
    } else {
        log::warn!("{} failures listed in {}", failures.len(), path.display());
        Outcome::Partial
    })
}

fn worker_pool(cfg: &ScanConfig) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Other(format!("cannot start worker pool: {e}")))
}

#[derive(Debug, Parser)]
#[command(name = "topicscan", version, about = "Scan topic counts and score number-of-topics metrics")]
pub struct Cli {
    /// Scan configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Recompute cells that already have results.
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads; defaults to available parallelism.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate every configured dataset.
    Ingest,
    /// Train models over the topic grid and write metric curves.
    Scan,
    /// Measure instability over the stability topic grid.
    Stability,
    /// Classify optima and write verdicts, performance tables and plot data.
    Report,
    /// Generate a synthetic corpus with a known number of topics.
    Synth(SynthArgs),
}

fn load_config(cli: &Cli) -> Result<ScanConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    let mut cfg = ScanConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        cfg.workers = Some(w);
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    if let Command::Synth(args) = &cli.command {
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&args.name));
        return cmd_synth(args, &out);
    }
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Ingest => cmd_ingest(&cfg),
        Command::Scan => cmd_scan(&cfg, cli.force),
        Command::Stability => cmd_stability(&cfg, cli.force),
        Command::Report => cmd_report(&cfg),
        Command::Synth(_) => unreachable!(),
    }
}

pub fn run(cli: Cli) -> ExitCode {
    let code = match execute(&cli) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code)
}
