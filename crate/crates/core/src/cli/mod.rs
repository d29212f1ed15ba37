//! Command-line front end.
//!
//! Every subcommand reads one TOML config (all keys optional), runs a
//! scenario and writes CSV tables into the output directory. Each table
//! starts with a `# key: value` block echoing the resolved config, which can
//! itself be passed back as `--config` to rerun the scenario.

mod config;
mod output;
mod runners;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{schema_help, Config, SweepKind, SCHEMA};
pub use runners::execute;

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "macrobell", version, about = "Macroscopic polarization Bell states: witness, sweeps, entanglement measures", after_long_help = schema_help())]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML config file, or a CSV written by an earlier run.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides run.seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Overrides run.pulses.
    #[arg(long, global = true, value_name = "N")]
    pub pulses: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Analytic and sampled witness with per-Stokes noise reduction factors.
    Witness,
    /// Aperture, phase, path-length or efficiency sweep.
    Sweep {
        /// Overrides sweep.kind.
        kind: Option<SweepKind>,
    },
    /// Schmidt numbers and the measured width ratio with histograms.
    Entanglement,
    /// Shot-noise calibration fit.
    Calibrate,
    /// Dichroic plate delays and the converted triplet.
    Plate,
    /// Gaussian engine versus truncated Fock oracle.
    OracleCheck,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Witness => "witness",
            Command::Sweep { .. } => "sweep",
            Command::Entanglement => "entanglement",
            Command::Calibrate => "calibrate",
            Command::Plate => "plate",
            Command::OracleCheck => "oracle-check",
        }
    }
}

fn resolve(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(pulses) = cli.pulses {
        cfg.run.pulses = pulses;
    }
    if let Command::Sweep { kind: Some(kind) } = &cli.command {
        cfg.sweep.kind = kind.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_with_threads(cli: &Cli, cfg: &Config) -> Result<Vec<PathBuf>> {
    match cli.threads {
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?
            .install(|| execute(&cli.command, cfg, &cli.out)),
        _ => execute(&cli.command, cfg, &cli.out),
    }
}

/// Parses arguments, runs, reports on stderr and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = resolve(&cli).and_then(|cfg| run_with_threads(&cli, &cfg));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("macrobell {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
