//! `selinf` command-line tool.
//!
//! Subcommands write JSON reports tagged with [`SCHEMA`] and a
//! [`RunManifest`]. Output bytes depend only on inputs, flags and seed.

pub mod data;
pub mod infer;
pub mod pivot;
pub mod simulate;

use std::ffi::OsString;
use std::fmt;
use std::path::Path;

use clap::{Parser, Subcommand};
use serde::Serialize;

pub const SCHEMA: &str = "selinf-mle/1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_EMPTY: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Bad flags or input files.
    Usage(String),
    EmptySelection,
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::EmptySelection => EXIT_EMPTY,
            Self::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self::Usage(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::EmptySelection => write!(f, "empty selection: the query selected no variables"),
            Self::Internal(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

/// Domain errors come from invalid settings; everything else is a solver or
/// numerical failure.
impl From<selinf::Error> for Failure {
    fn from(e: selinf::Error) -> Self {
        match e {
            selinf::Error::EmptySelection => Self::EmptySelection,
            selinf::Error::Query { ref source, .. } if **source == selinf::Error::EmptySelection => {
                Self::EmptySelection
            }
            selinf::Error::Domain(m) => Self::Usage(m),
            other => Self::Internal(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Provenance block embedded in every JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub subcommand: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: C,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl<C: Serialize> RunManifest<C> {
    pub fn new(subcommand: &'static str, seed: u64, config: C) -> Self {
        Self {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "selinf", version, about = "Selective inference by approximate maximum likelihood")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a randomized query on a CSV data set and report selective intervals.
    Infer(infer::InferArgs),
    /// Run a simulation experiment and write summary JSON and long CSV.
    Simulate(simulate::SimulateArgs),
    /// Check uniformity of the univariate pivot by Monte Carlo.
    PivotCheck(pivot::PivotArgs),
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| Failure::io(path, e))
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, contents: &str) -> CliResult<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Internal(e.to_string()))
        }
    }
}

/// Sizes the global rayon pool from `SELINF_THREADS` when set.
fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("SELINF_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::usage(format!("SELINF_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Internal(e.to_string()))
}

pub fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Infer(args) => infer::run(&args),
        Command::Simulate(args) => simulate::run(&args),
        Command::PivotCheck(args) => pivot::run(&args),
    }
}

/// Parses arguments, runs, reports failures on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("selinf: {f}");
            f.exit_code()
        }
    }
}
