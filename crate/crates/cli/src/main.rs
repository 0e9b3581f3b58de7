//! `discprobe` command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime error (I/O, malformed input data),
//! 2 usage or configuration error, 3 expectation mismatch (`--expect-table2`),
//! 4 at least one experiment cell failed.

mod corpus;
mod nmt_prep;
mod probe;

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "discprobe",
    version,
    about = "Layer-wise discourse relation probing toolkit"
)]
struct Cli {
    /// Master seed for every seeded step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a PDTB 2.0 pipe corpus into probe instances.
    Convert(corpus::ConvertArgs),
    /// Write the extraction manifest for an external embedding extractor.
    Manifest(corpus::ManifestArgs),
    /// Run the probing experiment matrix and write reports.
    Probe(probe::ProbeArgs),
    /// Build context-augmented translation data and initialization plans.
    NmtPrep(nmt_prep::NmtPrepArgs),
}

/// Failure classes, one per exit code.
#[derive(Debug)]
pub enum Failure {
    Runtime(anyhow::Error),
    Usage(anyhow::Error),
    Expectation(String),
    Cells { failed: usize, total: usize },
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Expectation(_) => 3,
            Failure::Cells { .. } => 4,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

pub type CmdResult = Result<(), Failure>;

pub fn usage(message: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow::anyhow!("{message}"))
}

/// Fails with a usage error unless `path` exists.
pub fn require_path(path: &Path, what: &str) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(usage(format!("{what} `{}` does not exist", path.display())))
    }
}

/// Writes a resolved configuration next to a command's outputs.
pub fn write_resolved<T: serde::Serialize>(path: &Path, config: &T) -> anyhow::Result<()> {
    let text = toml::to_string_pretty(config)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let seed = cli.seed;
    let outcome = match cli.command {
        Command::Convert(args) => corpus::convert(args, seed),
        Command::Manifest(args) => corpus::manifest(args),
        Command::Probe(args) => probe::probe(args, seed),
        Command::NmtPrep(args) => nmt_prep::nmt_prep(args, seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Runtime(e) | Failure::Usage(e) => eprintln!("error: {e:#}"),
                Failure::Expectation(m) => eprintln!("expectation mismatch: {m}"),
                Failure::Cells { failed, total } => eprintln!("{failed} of {total} cells failed"),
            }
            ExitCode::from(failure.code())
        }
    }
}
