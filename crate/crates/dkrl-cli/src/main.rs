//! `dkrl`: generate -> fit -> evaluate -> bandit -> benchmark pipelines with
//! seeded reproducibility and plot-ready CSV/JSON outputs.

mod commands;
mod config;
mod error;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::load_config;
use error::Result;

#[derive(Parser)]
#[command(
    name = "dkrl",
    version,
    about = "Double kernel representation learning: data generation, fitting, adaptive experimentation, and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a preset or explicit spec.
    Gen {
        /// JSON config: {preset | spec, seed, out_dir}
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit the double-kernel estimator or a baseline on a dataset directory.
    Fit {
        /// JSON config: {data_dir, spec_g, spec_h, estimator, outcome, split, seed, out_model, out_metrics}
        #[arg(long)]
        config: PathBuf,
    },
    /// Run explore-then-commit (full and treatment-only) across seeds.
    Bandit {
        /// JSON config: {design, horizon, explore_rounds?, estimator, noise, seeds, out_dir}
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimation-error table across planted ranks (dkrl vs prod_kernel).
    Bench {
        /// JSON config: {preset, ranks, seeds, split, lambda, sigma, out_dir}
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { config } => commands::gen::run(&load_config(&config)?),
        Command::Fit { config } => commands::fit::run(&load_config(&config)?),
        Command::Bandit { config } => commands::bandit::run(&load_config(&config)?),
        Command::Bench { config } => commands::bench::run(&load_config(&config)?),
    }
}

fn main() -> ExitCode {
    // worker cap for seed fan-out
    if let Ok(raw) = std::env::var("DKRL_MAX_WORKERS") {
        if let Ok(n) = raw.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dkrl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
