#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::{ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "chonsager", version, about = "Cahn-Hilliard transitions with a nonlinear Onsager mobility")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Critical temperature, transition type and equilibrium census.
    Classify,
    /// Full PDE run from small random data.
    Simulate,
    /// Reduced critical-mode dynamics and their equilibria.
    Reduce,
    /// Terminal amplitudes over temperatures below T_c and the fitted exponent.
    Sweep,
    /// PDE critical-mode projections against the reduced system.
    Validate,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(ConfigError),
    #[error("{0}")]
    Numeric(ch_onsager::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli.config.ok_or_else(|| {
        CliError::Config(ConfigError {
            path: PathBuf::from("<none>"),
            line: None,
            message: "--config PATH is required".into(),
        })
    })?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    std::fs::create_dir_all(&cfg.output_dir)?;
    let summary = match cli.command {
        Command::Classify => commands::classify(&cfg)?,
        Command::Simulate => commands::simulate(&cfg)?,
        Command::Reduce => commands::reduce(&cfg)?,
        Command::Sweep => commands::sweep(&cfg)?,
        Command::Validate => commands::validate(&cfg)?,
    };
    if !cli.quiet {
        print!("{summary}");
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
