//! Library behind the `ratsemi` binary: configuration, report rendering,
//! file formats, offline verification and the acceptance corpus.

pub mod commands;
pub mod config;
pub mod corpus;
pub mod io;
pub mod witness;

use std::path::PathBuf;

use ratsemi_core::Error;
use serde_json::json;

use crate::config::{Command, RunConfig};

/// Exit status when a run completes but a check fails (corpus, verify).
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing fixture file {}", .0.display())]
    MissingFixture(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => EXIT_FAILED,
            CliError::Core(Error::CoefficientOverflowBudget { .. }) => EXIT_BUDGET,
            CliError::Core(
                Error::RootFindingStalled { .. } | Error::IntervalBlowup { .. } | Error::DerivativeVanishes(_),
            ) => EXIT_NUMERIC,
            _ => EXIT_CONFIG,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::MissingFixture(_) => "missing_fixture",
            CliError::Io { .. } => "io",
            CliError::Failed(_) => "failed",
            CliError::Core(e) => match e {
                Error::CoefficientOverflowBudget { .. } => "budget_exhausted",
                Error::RootFindingStalled { .. } | Error::IntervalBlowup { .. } | Error::DerivativeVanishes(_) => {
                    "numeric_stall"
                }
                _ => "invalid_input",
            },
        }
    }

    /// Machine-readable form for stderr.
    pub fn to_json(&self) -> String {
        json!({"error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code()}).to_string()
    }
}

/// What a successful run produced; the caller decides where `stdout` goes.
pub struct RunOutput {
    pub stdout: Vec<u8>,
    /// Non-zero when the run completed but something it checked failed.
    pub status: i32,
}

/// Runs one command: writes artifacts atomically and returns the text for
/// stdout (the report, unless `config.report` redirects it).
pub fn run(config: &RunConfig) -> Result<RunOutput, CliError> {
    config.validate()?;
    let out = match &config.command {
        Command::Relations(a) => commands::relations(config, a)?,
        Command::Classify(a) => commands::classify_cmd(config, a)?,
        Command::Structure(a) => commands::structure(config, a)?,
        Command::Theta(a) => commands::theta(config, a)?,
        Command::Measure(a) => commands::measure(config, a)?,
        Command::MeasureCompare(a) => commands::measure_compare(config, a)?,
        Command::Dip(a) => commands::dip(config, a)?,
        Command::Ruelle(a) => commands::ruelle(config, a)?,
        Command::Corpus(a) => {
            let selected = corpus::select(a.filter);
            let c = corpus::Corpus::new(&a.fixtures, config.seed);
            c.check_fixtures(&selected)?;
            let outcomes = selected.iter().map(|k| corpus::run_criterion(k, &c)).collect::<Result<Vec<_>, _>>()?;
            let table = corpus::table(&outcomes)?;
            let status = if outcomes.iter().all(|o| o.passed) { 0 } else { EXIT_FAILED };
            return Ok(match &a.out {
                Some(p) => {
                    io::write_atomic(p, &table)?;
                    RunOutput { stdout: Vec::new(), status }
                }
                None => RunOutput { stdout: table, status },
            });
        }
        Command::Verify(a) => {
            let outcome = witness::verify_document(&io::read_json(&a.report)?)?;
            let mut text = serde_json::to_string_pretty(&outcome).expect("serializable");
            text.push('\n');
            let status = if outcome.verified { 0 } else { EXIT_FAILED };
            return Ok(RunOutput { stdout: text.into_bytes(), status });
        }
    };
    for (path, bytes) in &out.artifacts {
        io::write_atomic(path, bytes)?;
    }
    match &config.report {
        Some(p) => {
            io::write_atomic(p, out.report.as_bytes())?;
            Ok(RunOutput { stdout: Vec::new(), status: 0 })
        }
        None => Ok(RunOutput { stdout: out.report.into_bytes(), status: 0 }),
    }
}
