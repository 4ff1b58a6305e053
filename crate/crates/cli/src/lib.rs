//! Command-line front end for `mfbm-ruin`.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::Config;
pub use error::{CliError, CliResult};
use experiments::ExperimentId;
use output::{OutputDir, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "mfbm-ruin",
    version,
    about = "Mixed fractional Brownian surplus simulation, drift estimation and ruin probabilities"
)]
pub struct Cli {
    /// Flat JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one surplus path.
    Simulate,
    /// Kernel weights and quadratic variations for every horizon.
    Kernel,
    /// Drift MLE from an observed path CSV.
    EstimateDrift,
    /// Finite-time or ultimate ruin probability.
    Ruin,
    /// First-passage moments against the bound and asymptote.
    Passage,
    /// Named experiment.
    Experiment {
        #[arg(value_enum)]
        id: ExperimentId,
    },
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Simulate => "simulate".into(),
            Command::Kernel => "kernel".into(),
            Command::EstimateDrift => "estimate-drift".into(),
            Command::Ruin => "ruin".into(),
            Command::Passage => "passage".into(),
            Command::Experiment { id } => format!("experiment {}", id.name()),
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<RunManifest> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    cfg.seed = Some(seed);
    if cli.threads == Some(0) {
        return Err(CliError::invalid("threads", "must be at least 1"));
    }
    let start = Instant::now();
    let mut out = OutputDir::create(&cli.out)?;
    let mut work = || -> CliResult<()> {
        match &cli.command {
            Command::Simulate => commands::simulate(&cfg, seed, &mut out),
            Command::Kernel => commands::kernel(&cfg, &mut out),
            Command::EstimateDrift => commands::estimate_drift(&cfg, seed, &mut out),
            Command::Ruin => commands::ruin(&cfg, seed, &mut out),
            Command::Passage => commands::passage(&cfg, seed, &mut out, false),
            Command::Experiment { id } => experiments::run(*id, &cfg, seed, &mut out),
        }
    };
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::invalid("threads", e))?
            .install(work)?,
        None => work()?,
    }
    out.finish(&cli.command.name(), seed, cfg.clone(), start.elapsed())
}
