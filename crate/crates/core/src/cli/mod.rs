//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 for
//! numerical failures. `NONMARKOV_OUTPUT_DIR`, when set, replaces the
//! directory part of the output path.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::Error;
pub use config::{ConfigFlags, ModelKind, OutputFormat, RunConfig};

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

pub const OUTPUT_DIR_ENV: &str = "NONMARKOV_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "nonmarkov", version, about = "Trace-distance non-Markovianity of open quantum systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time-local decay rate on a grid: columns t, γ (and Δ for JC).
    Rate(ConfigFlags),
    /// Trace distance and its derivative for one pair: columns t, D, σ.
    Trajectory(ConfigFlags),
    /// Truncated measure maximized over canonical and random pairs.
    Measure(ConfigFlags),
    /// Measure over a detuning range (JC only).
    Sweep(ConfigFlags),
    /// Complete positivity of every interval propagator.
    Divisibility(ConfigFlags),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("{0}")]
    Output(String),
    #[error("all {0} sweep points failed; first failure: {1}")]
    SweepFailed(usize, String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidState(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Numerical(_) | CliError::SweepFailed(..) => 3,
        }
    }
}

/// Rendered command output.
pub(crate) enum Report {
    Csv { preamble: Vec<String>, table: crate::io::CsvTable },
    Json(serde_json::Value),
}

impl Report {
    fn write_to(&self, mut w: impl Write) -> Result<(), CliError> {
        let fail = |e: std::io::Error| CliError::Output(format!("write failed: {e}"));
        match self {
            Report::Csv { preamble, table } => {
                for line in preamble {
                    writeln!(w, "# {line}").map_err(fail)?;
                }
                table.write_to(&mut w).map_err(|e| CliError::Output(e.to_string()))
            }
            Report::Json(v) => {
                serde_json::to_writer_pretty(&mut w, v).map_err(|e| CliError::Output(format!("write failed: {e}")))?;
                writeln!(w).map_err(fail)
            }
        }
    }
}

fn output_path(cfg: &RunConfig) -> Option<PathBuf> {
    let path = cfg.output.clone()?;
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => Some(PathBuf::from(dir).join(path.file_name().unwrap_or(path.as_os_str()))),
        _ => Some(path),
    }
}

/// Runs one invocation, writing the report to `stdout` unless an output
/// path is configured.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (flags, default_format) = match &cli.command {
        Command::Rate(f) | Command::Trajectory(f) | Command::Sweep(f) => (f, OutputFormat::Csv),
        Command::Measure(f) | Command::Divisibility(f) => (f, OutputFormat::Json),
    };
    let cfg = RunConfig::resolve(flags)?;
    let format = cfg.format.unwrap_or(default_format);
    let (report, outcome) = match &cli.command {
        Command::Rate(_) => (commands::rate(&cfg, format)?, Ok(())),
        Command::Trajectory(_) => (commands::trajectory(&cfg, format)?, Ok(())),
        Command::Measure(_) => (commands::measure(&cfg, format)?, Ok(())),
        Command::Sweep(_) => commands::sweep(&cfg, format)?,
        Command::Divisibility(_) => (commands::divisibility(&cfg, format)?, Ok(())),
    };
    match output_path(&cfg) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)
                    .map_err(|e| CliError::Output(format!("cannot create {}: {e}", parent.display())))?;
            }
            let file = std::fs::File::create(&path)
                .map_err(|e| CliError::Output(format!("cannot create {}: {e}", path.display())))?;
            let mut w = std::io::BufWriter::new(file);
            report.write_to(&mut w)?;
            w.flush().map_err(|e| CliError::Output(format!("write failed: {e}")))?;
        }
        None => report.write_to(stdout)?,
    }
    outcome
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nonmarkov: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
