//! `smp`: generate noisy datasets, train with multi-prototype label
//! correction, run ablation sweeps and print reports.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 runtime error.

mod commands;
mod config;
mod failure;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::failure::{CliResult, Code, Failure};

#[derive(Debug, Parser)]
#[command(name = "smp", version, about = "Multi-prototype self-learning on noisy labels")]
struct Cli {
    /// Overrides the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads. Changes speed only, never results.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with injected label noise.
    GenData {
        #[arg(long)]
        config: PathBuf,
        /// Output file; `.csv` selects CSV, anything else the binary format.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a classifier and write metrics, checkpoints and labels.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
        /// Continue from a saved training state.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run one-axis ablation sweeps.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        /// Model or training-state checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Optional CSV of predictions.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print tables for a train or sweep directory.
    Report {
        /// Run directory.
        dir: PathBuf,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config("threads: must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new(Code::Runtime, e))?;
    }
    match cli.command {
        Command::GenData { config, out } => commands::gen_data(&config, &out, cli.seed),
        Command::Train { config, out, resume } => commands::train(&config, &out, cli.seed, resume.as_deref()),
        Command::Sweep { config, out } => commands::sweep(&config, &out, cli.seed),
        Command::Eval { checkpoint, data, out } => commands::eval(&checkpoint, &data, out.as_deref()),
        Command::Report { dir } => commands::report(&dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
