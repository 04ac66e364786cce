//! Experiment harness for two-view policy co-training.
//!
//! Workflow: `generate` writes seeded instance files plus a train/val/test
//! manifest, `train` runs co-training (or a single-view baseline) and drops
//! checkpoints plus history CSVs into the run directory, `evaluate` scores
//! the checkpoints on the test split, and `check` verifies the run
//! directory is complete. All randomness derives from one run seed, so any
//! command repeated with the same configuration produces byte-identical
//! CSVs.

mod commands;
mod config;
mod csv;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{RunConfig, RunMode};

#[derive(Parser)]
#[command(name = "cotrain", about = "Two-view policy co-training harness")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Training/evaluation mode: copier, single-A or single-B.
    #[arg(long, global = true, value_name = "MODE")]
    mode: Option<String>,

    /// Run seed; all randomness derives from it.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Run output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Print the fully resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write seeded problem instances and the split manifest.
    Generate,
    /// Run co-training (or a single-view baseline) on the train split.
    Train,
    /// Score checkpoints on the test split; grid runs also emit the
    /// disagreement-bound report.
    Evaluate,
    /// Verify that the run directory contains every expected artifact.
    Check,
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    if let Some(mode) = &cli.mode {
        cfg.mode = RunMode::parse(mode)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.display().to_string();
    }
    cfg.finalize()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = resolve_config(&cli)?;
    if cli.print_config {
        print!("{}", cfg.render());
        return Ok(());
    }
    match cli.command {
        Some(Command::Generate) => commands::cmd_generate(&cfg)?,
        Some(Command::Train) => commands::cmd_train(&cfg)?,
        Some(Command::Evaluate) => commands::cmd_evaluate(&cfg)?,
        Some(Command::Check) => {
            if !commands::cmd_check(&cfg)? {
                std::process::exit(1);
            }
        }
        None => {
            anyhow::bail!("missing subcommand (generate | train | evaluate | check)");
        }
    }
    Ok(())
}
