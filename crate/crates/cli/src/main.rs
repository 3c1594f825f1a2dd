//! `plm`: build datasets, train, evaluate, sweep and export plot data.

mod bundle;
mod commands;
mod config;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::config::Overrides;

#[derive(Parser)]
#[command(name = "plm", version, about = "Partial label masking experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings that may replace the config file's values.
#[derive(Args)]
struct OverrideArgs {
    /// Training seed, replacing `trainer.seed`.
    #[arg(long, env = "PLM_SEED")]
    seed: Option<u64>,
    /// Run directory, replacing `output.run_dir`.
    #[arg(long, env = "PLM_RUN_DIR")]
    run_dir: Option<PathBuf>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            seed: a.seed,
            run_dir: a.run_dir,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the train/test containers and the stats sidecar.
    DatasetBuild { config: PathBuf },
    /// Train on a built dataset and write a results bundle.
    Train {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Re-score a saved model on the test split.
    Evaluate {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Checkpoint to load instead of `<run_dir>/model.bin`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Decision threshold instead of `trainer.threshold`.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Train every cell of the `[sweep]` grid and write `sweep.csv`.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Regenerate the CSV exports of a run directory.
    ExportPlots { run_dir: PathBuf },
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::DatasetBuild { config } => {
            commands::dataset_build(&config::load(&config, Overrides::default())?)?
        }
        Command::Train { config, overrides } => {
            commands::train(&config::load(&config, overrides.into())?)?
        }
        Command::Evaluate {
            config,
            overrides,
            model,
            threshold,
        } => commands::evaluate_run(
            &config::load(&config, overrides.into())?,
            model.as_deref(),
            threshold,
        )?,
        Command::Sweep { config, overrides } => {
            if commands::sweep(&config::load(&config, overrides.into())?)? > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::ExportPlots { run_dir } => bundle::export_plots(&run_dir)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
