//! Config-driven driver: `leadlag <subcommand> --config run.toml`.
//!
//! Report bodies are pure functions of the config. Wall-clock data and the
//! worker count go to `run_metadata.json` only.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use config::{Config, LoadedConfig};
pub use error::{CliError, ErrorKind, EXIT_CONFIG, EXIT_RUNTIME};
pub use output::{Format, OutputFile};

#[derive(Debug, Clone, Parser)]
#[command(name = "leadlag", version, about = "Lead-lag no-arbitrage experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, default_value = "leadlag.toml")]
    pub config: PathBuf,
    /// Directory for reports; created if missing.
    #[arg(long, global = true, default_value = "leadlag-out")]
    pub out_dir: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Layout of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Simulate a path batch.
    Simulate,
    /// Run strategies under frictions and report arbitrage statistics.
    Experiment,
    /// Estimate small-ball, stickiness and sign-pattern probabilities.
    Verify,
    /// Search a consistent price system on a scenario tree.
    Cps,
    /// Evaluate the spectral integrability check.
    Gsvz,
}

/// Report files for `command`, without touching the file system beyond
/// fixtures referenced by the config.
pub fn produce(command: Command, loaded: &LoadedConfig, format: Format) -> Result<Vec<OutputFile>, CliError> {
    let cfg = &loaded.config;
    match command {
        Command::Simulate => commands::simulate(cfg, format),
        Command::Experiment => commands::experiment(cfg, format),
        Command::Verify => commands::verify(cfg, format),
        Command::Cps => commands::cps(loaded, format),
        Command::Gsvz => commands::gsvz(cfg, format),
    }
}

#[derive(Debug, Serialize)]
struct RunMetadata<'a> {
    command: Command,
    config: String,
    format: Format,
    workers: usize,
    version: &'static str,
    started_unix_ms: u128,
    elapsed_ms: u128,
    files: Vec<&'a str>,
}

/// Loads the config, runs the command on the requested pool and writes the
/// reports plus `run_metadata.json`. Returns the names of written files.
pub fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let loaded = config::load(&cli.config)?;
    let pool = match cli.workers {
        Some(0) => return Err(CliError::config("--workers", "must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n),
        None => rayon::ThreadPoolBuilder::new(),
    }
    .build()
    .map_err(|e| CliError::runtime("--workers", e))?;
    let files = pool.install(|| produce(cli.command, &loaded, cli.format))?;
    output::write_all(&cli.out_dir, &files)?;

    let meta = RunMetadata {
        command: cli.command,
        config: cli.config.display().to_string(),
        format: cli.format,
        workers: pool.current_num_threads(),
        version: env!("CARGO_PKG_VERSION"),
        started_unix_ms: started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis()),
        elapsed_ms: clock.elapsed().as_millis(),
        files: files.iter().map(|f| f.name.as_str()).collect(),
    };
    let meta_file = OutputFile::json("run_metadata.json", &meta);
    output::write_all(&cli.out_dir, std::slice::from_ref(&meta_file))?;
    let mut names: Vec<String> = files.into_iter().map(|f| f.name).collect();
    names.push(meta_file.name);
    Ok(names)
}
