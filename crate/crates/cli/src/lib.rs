//! Command-line orchestration for `hydrolimit`: configuration, run pipelines
//! and on-disk artifacts.
//!
//! Every command writes `resolved_config.json`, its CSV and JSON outputs, and
//! a `manifest.json` holding the config hash, code version, velocity grid,
//! certification reference and the SHA-256 of every file it wrote.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use config::{parse_config, RunConfig};
pub use output::{Manifest, OutputDir, Provenance};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration `{key}`: {constraint}")]
    Config { key: String, constraint: String },

    #[error(transparent)]
    Core(#[from] hydrolimit::Error),

    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Core(hydrolimit::Error::Certification(_)) => "certification",
            CliError::Core(_) => "run",
            CliError::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            _ => 1,
        }
    }

    /// Structured form printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let key = match self {
            CliError::Config { key, .. } => Some(key.clone()),
            CliError::Core(hydrolimit::Error::InvalidParameter { name, .. }) => Some(name.to_string()),
            _ => None,
        };
        json!({ "error": { "kind": self.kind(), "key": key, "message": self.to_string() } })
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "hydrolimit", version, about = "Kinetic and fluid contact-wave experiments")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration file; every key is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory, created when missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Seed of the randomized certification trials.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Override a configuration key, e.g. `--set kinetic.nx=800`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Self-similar profile and the viscous contact wave with its residuals.
    Wave {
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Measure the collision operator constants.
    Certify {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Kinetic run from the wave Maxwellian, with error and energy traces.
    Kinetic {
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Navier-Stokes run from the contact wave.
    Fluid {
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Convergence sweep over a decreasing list of epsilons.
    Sweep {
        /// Comma-separated, strictly decreasing.
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
    },
    /// Summarize an output directory and verify its file hashes.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Wave { .. } => "wave",
            Command::Certify { .. } => "certify",
            Command::Kinetic { .. } => "kinetic",
            Command::Fluid { .. } => "fluid",
            Command::Sweep { .. } => "sweep",
            Command::Report => "report",
        }
    }

    /// Named flags, expressed as overrides so they go through validation.
    fn overrides(&self) -> Vec<String> {
        let list = |v: &[f64]| v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Command::Wave { epsilon: Some(e) } => vec![format!("wave.epsilon={e}")],
            Command::Certify { trials: Some(n) } => vec![format!("certify.trials={n}")],
            Command::Kinetic { epsilon: Some(e) } => vec![format!("kinetic.epsilon={e}")],
            Command::Fluid { epsilon: Some(e) } => vec![format!("fluid.epsilon={e}")],
            Command::Sweep { epsilons: Some(v) } => vec![format!("sweep.epsilons=[{}]", list(v))],
            _ => Vec::new(),
        }
    }
}

/// Resolves the configuration and runs one command; returns the summary that
/// `main` prints.
pub fn run(cli: &Cli) -> Result<serde_json::Value, CliError> {
    if let Command::Report = cli.command {
        return commands::report(&cli.common.out);
    }
    let text = match &cli.common.config {
        Some(p) => {
            Some(std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("cannot read {}: {e}", p.display())))?)
        }
        None => None,
    };
    let mut overrides = cli.common.overrides.clone();
    if let Some(seed) = cli.common.seed {
        overrides.push(format!("seed={seed}"));
    }
    overrides.extend(cli.command.overrides());
    let config = parse_config(text.as_deref(), &overrides)?;
    let work = || commands::dispatch(cli.command.name(), &config, &cli.common.out);
    match cli.common.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config { key: "--threads".into(), constraint: e.to_string() })?
            .install(work),
        None => work(),
    }
}
