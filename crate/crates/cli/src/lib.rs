//! `screme` command-line front end.
//!
//! Exit codes: 0 success, 1 internal failure, 2 configuration error,
//! 3 trace error (missing file or bad line), 4 infeasible reconfiguration.

pub mod config;
mod commands;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use screme_core::Error;

pub use config::Config;

#[derive(Parser, Debug)]
#[command(name = "screme", version, about = "Resilient-memory workbench: coverage, timing, lifetime and topology experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Eq)]
pub enum Command {
    /// Fault-coverage table (DCE/DUE/SDC per scenario and scheme)
    Coverage(#[command(flatten)] CommonArgs),
    /// Trace-driven timing: slow-chip ratio, error-rate and rank-plan sweeps
    Timing(#[command(flatten)] CommonArgs),
    /// Failure probability over the module lifetime
    Lifetime(#[command(flatten)] CommonArgs),
    /// Applies failure events to a DIMM topology and reports the result
    Topology(#[command(flatten)] CommonArgs),
}

#[derive(clap::Args, Debug, Clone, PartialEq, Eq)]
pub struct CommonArgs {
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trials (coverage, lifetime) or synthetic trace length (timing)
    #[arg(long)]
    pub trials: Option<u64>,
    /// Output file, or a directory to receive an auto-named file
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format '{s}' (csv or json)")),
        }
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Coverage(_) => "coverage",
            Command::Timing(_) => "timing",
            Command::Lifetime(_) => "lifetime",
            Command::Topology(_) => "topology",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Coverage(a) | Command::Timing(a) | Command::Lifetime(a) | Command::Topology(a) => a,
        }
    }
}

/// A failed run: exit code, message and optional detail lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    pub details: Vec<String>,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), details: Vec::new() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(2, message)
    }

    pub fn trace(message: impl Into<String>) -> Self {
        Self::new(3, message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::TraceParse { .. } => 3,
            Error::Infeasible { .. } => 4,
            Error::DivisionByZero => 1,
        };
        let details = match &e {
            Error::Infeasible { violations, .. } => violations.clone(),
            _ => Vec::new(),
        };
        Self { code, message: e.to_string(), details }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)?;
        for d in &self.details {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

/// Resolved settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Run {
    pub command: &'static str,
    pub config: Config,
    pub seed: u64,
    pub trials: Option<u64>,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl Run {
    fn resolve(cmd: &Command) -> Result<Self, Failure> {
        let a = cmd.args();
        let mut config = match &a.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::config(format!("cannot read config {}: {e}", p.display())))?;
                Config::parse(&text)?
            }
            None => Config::default(),
        };
        let seed = match a.seed {
            Some(s) => s,
            None => config.get_or("seed", 1u64)?,
        };
        let format = match a.format {
            Some(f) => f,
            None => config.get::<Format>("format")?.unwrap_or(Format::Csv),
        };
        let out = a.out.clone().or_else(|| config.raw("out").map(PathBuf::from));
        config.set("seed", seed.to_string());
        config.set("format", format.ext());
        if let Some(t) = a.trials {
            if t == 0 {
                return Err(Failure::config("trials must be at least 1"));
            }
        }
        Ok(Self { command: cmd.name(), config, seed, trials: a.trials, format, out })
    }

    /// First 8 hex digits of SHA-256 over the subcommand and resolved settings.
    pub fn config_hash(&self) -> String {
        let mut canon = self.config.clone();
        canon.set("out", "");
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        h.update(b"\n");
        h.update(canon.canonical().as_bytes());
        if let Some(t) = self.trials {
            h.update(format!("trials = {t}\n").as_bytes());
        }
        h.finalize().iter().take(4).map(|b| format!("{b:02x}")).collect()
    }

    /// `<subcommand>-seed<seed>-<hash>.<ext>`
    pub fn file_name(&self) -> String {
        format!("{}-seed{}-{}.{}", self.command, self.seed, self.config_hash(), self.format.ext())
    }
}

fn execute(cmd: &Command, stdout: &mut dyn Write) -> Result<(), Failure> {
    let run = Run::resolve(cmd)?;
    let text = match cmd {
        Command::Coverage(_) => commands::coverage(&run)?,
        Command::Timing(_) => commands::timing(&run)?,
        Command::Lifetime(_) => commands::lifetime(&run)?,
        Command::Topology(_) => commands::topology(&run)?,
    };
    let io = |e: std::io::Error| Failure::new(1, format!("write failed: {e}"));
    match &run.out {
        None => stdout.write_all(text.as_bytes()).map_err(io),
        Some(p) => {
            let path = if p.is_dir() { p.join(run.file_name()) } else { p.clone() };
            std::fs::write(&path, text).map_err(io)?;
            writeln!(stdout, "{}", path.display()).map_err(io)
        }
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command, stdout) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "error: {f}");
            f.code
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
