//! `callnet`: from call detail records to statistically validated calling
//! networks, per-figure tables and distribution fits.
//!
//! Every stage reads and writes plain-text artifacts in a working directory,
//! so any stage can be rerun on its own. Exit status: 0 success, 1 runtime
//! failure, 2 usage or configuration error.

mod analyze;
mod artifacts;
mod build;
mod components;
mod config;
mod fit;
mod generate;
mod report;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{usage, Config, UsageError};

#[derive(Parser, Debug)]
#[command(name = "callnet", version, about = "Calling-network pipeline: generate, build, validate, analyze, fit")]
struct Cli {
    /// Flat `key = value` settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 1 gives a sequential run. Defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed of every random choice (synthetic data, sampled sources and edges).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic CDR file (and ground truth for planted ties).
    Generate(generate::GenerateArgs),
    /// Parse and filter a CDR file, then build the DCN and MCN.
    Build(build::BuildArgs),
    /// Test every link against random matching and keep the validated ones.
    Validate(validate::ValidateArgs),
    /// Component size histograms and snowball curves.
    Components(components::ComponentsArgs),
    /// Emit one tidy table per figure panel plus a manifest.
    Analyze(analyze::AnalyzeArgs),
    /// Fit a distribution model to density tables.
    Fit(fit::FitArgs),
    /// Summarize sizes, thresholds and headline metrics.
    Report(report::ReportArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    if let Some(n) = cfg.pick(cli.threads, "threads")? {
        if n == 0 {
            return usage("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let seed = cfg.pick_or(cli.seed, "seed", 0)?;
    match cli.command {
        Command::Generate(a) => generate::run(a, &cfg, seed),
        Command::Build(a) => build::run(a, &cfg),
        Command::Validate(a) => validate::run(a, &cfg),
        Command::Components(a) => components::run(a, &cfg, seed),
        Command::Analyze(a) => analyze::run(a, &cfg, seed),
        Command::Fit(a) => fit::run(a, &cfg),
        Command::Report(a) => report::run(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
