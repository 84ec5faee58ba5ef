//! Command-line front end: configuration loading, subcommands and exit codes.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use curate_core::Result;

pub use commands::exit_code;
pub use config::{EngineConfig, Overrides};

#[derive(Debug, Parser)]
#[command(name = "curate", version, about = "Error detection, adaptive voting and VAE augmentation for tabular data")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Input CSV, overriding data.path.
    #[arg(long, short, global = true)]
    pub input: Option<PathBuf>,
    /// Output directory, overriding output_dir.
    #[arg(long, short, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of synthetic rows, overriding augment.n_aug.
    #[arg(long, global = true)]
    pub n_aug: Option<usize>,
    /// Injection rate, overriding inject.gamma.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the detectors and adaptive voting.
    Detect {
        /// Extra detection sets (CSV with detector_id,row,col) to vote with.
        #[arg(long)]
        detections: Option<PathBuf>,
    },
    /// Detect, extract the clean fraction, augment and integrate.
    Curate {
        #[arg(long)]
        detections: Option<PathBuf>,
    },
    /// Inject synthetic errors into a clean table.
    Inject {
        /// Reload the written artifacts and check that restoring them
        /// reproduces the input exactly.
        #[arg(long)]
        verify_restore: bool,
    },
    /// Compare pipelines on a downstream model over repeated runs.
    Evaluate,
    /// Precision, recall and F1 of plain Min-K voting for each threshold.
    SweepK,
    /// Downstream metric as a function of the number of synthetic rows.
    SweepAug {
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Downstream metric as a function of the injection rate.
    SweepErrorRate {
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
    },
}

impl GlobalArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            input: self.input.clone(),
            output_dir: self.output_dir.clone(),
            seed: self.seed,
            n_aug: self.n_aug,
            gamma: self.gamma,
        }
    }

    pub fn engine_config(&self) -> Result<EngineConfig> {
        let mut cfg = match &self.config {
            Some(path) => EngineConfig::load(path)?,
            None => EngineConfig::default_with_output(),
        };
        cfg.apply(&self.overrides());
        Ok(cfg)
    }
}

/// Runs a parsed command line and returns the text to print.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = cli.global.engine_config()?;
    match &cli.command {
        Command::Detect { detections } => {
            commands::detect(&cfg, detections.as_deref()).map(|s| s.render())
        }
        Command::Curate { detections } => {
            commands::curate(&cfg, detections.as_deref()).map(|s| s.render())
        }
        Command::Inject { verify_restore } => {
            commands::inject_cmd(&cfg, *verify_restore).map(|s| s.render())
        }
        Command::Evaluate => commands::evaluate_cmd(&cfg).map(|(_, text)| text),
        Command::SweepK => commands::sweep_k_cmd(&cfg),
        Command::SweepAug { sizes } => commands::sweep_aug_cmd(&cfg, sizes.as_deref()),
        Command::SweepErrorRate { gammas } => {
            commands::sweep_error_rate_cmd(&cfg, gammas.as_deref())
        }
    }
}
