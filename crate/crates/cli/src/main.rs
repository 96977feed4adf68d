//! `baed` — synthetic-benchmark generation, ego-graph diffusion training,
//! balanced detector training, and evaluation from the command line.
//!
//! Every command is deterministic for a fixed config and seed, writes its
//! artifacts atomically, and embeds the config digest and seed that
//! produced them.

mod artifacts;
mod commands;
mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use baed_core::diffusion::ScheduleError;
use baed_core::eval::{MetricError, TheoryError};
use baed_core::graph::{GraphIoError, SplitError, SynthError};
use baed_core::numeric::{CheckpointError, OptimError};
use baed_core::trainer::TrainError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("output exists, pass --force to overwrite: {0}")]
    OutputExists(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Graph(#[from] GraphIoError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::OutputExists(_) => "output-exists",
            CliError::Data(_) => "data",
            CliError::Graph(_) => "dataset-format",
            CliError::Synth(_) => "synth",
            CliError::Split(_) => "split",
            CliError::Schedule(_) => "schedule",
            CliError::Train(_) => "train",
            CliError::Metric(_) => "metric",
            CliError::Theory(_) => "theory",
            CliError::Checkpoint(_) => "checkpoint",
            CliError::Optim(_) => "optimizer",
            CliError::Json(_) => "json",
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file with flat namespaced keys (e.g. "diffusion.steps").
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed; overrides the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Parser)]
#[command(name = "baed", version, about = "Balanced anomaly-guided ego-graph diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic planted-clique benchmark dataset.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Ingest edge/feature/label files into the canonical dataset format.
    Ingest {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Stratified train/val/test split of a dataset.
    Split {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset directory (from synth or ingest).
        #[arg(long)]
        data: PathBuf,
    },
    /// Pre-train the guided diffusion model on anomalous training ego-graphs.
    TrainDiffusion {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        split: PathBuf,
    },
    /// Sample anomalous ego-graphs from a trained diffusion model.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        diffusion: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long, default_value_t = 16)]
        count: usize,
        /// aggregate = uniform-weighted guidance over training anomalies;
        /// zero = unconditional.
        #[arg(long, default_value = "aggregate")]
        guidance: String,
    },
    /// Train the inductive detector with batch balancing.
    TrainDetector {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        split: PathBuf,
        /// none | random-duplicate | unconditional | baed
        #[arg(long)]
        mode: String,
        /// Diffusion checkpoint (required for unconditional/baed).
        #[arg(long)]
        diffusion: Option<PathBuf>,
    },
    /// Score the test split (or evaluate an existing scores file).
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Existing scores CSV "node_id,score,label".
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        detector: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Seed-averaged comparison of augmentation modes.
    CompareModes {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated modes.
        #[arg(long, default_value = "none,baed")]
        modes: String,
        /// Comma-separated seeds.
        #[arg(long, default_value = "15,42,63,87,94")]
        seeds: String,
    },
    /// Verify the optimal-threshold theory on random finite instances.
    ThresholdAnalyze {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long, default_value_t = 5)]
        coefficient_sets: usize,
    },
    /// Export guidance embeddings as CSV for external visualization.
    ExportEmbeddings {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        diffusion: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        split: PathBuf,
        /// Also embed this many generated samples (node_id = -1 rows).
        #[arg(long, default_value_t = 0)]
        include_generated: usize,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { common } => commands::data::synth(&common),
        Command::Ingest { common, edges, features, labels } => {
            commands::data::ingest(&common, &edges, &features, &labels)
        }
        Command::Split { common, data } => commands::data::split(&common, &data),
        Command::TrainDiffusion { common, data, split } => {
            commands::diffusion::train_diffusion(&common, &data, &split)
        }
        Command::Generate { common, diffusion, data, split, count, guidance } => {
            commands::diffusion::generate(&common, &diffusion, &data, &split, count, &guidance)
        }
        Command::TrainDetector { common, data, split, mode, diffusion } => {
            commands::detector::train_detector(&common, &data, &split, &mode, diffusion.as_deref())
        }
        Command::Evaluate { common, scores, detector, data, split } => commands::detector::evaluate(
            &common,
            scores.as_deref(),
            detector.as_deref(),
            data.as_deref(),
            split.as_deref(),
        ),
        Command::CompareModes { common, data, modes, seeds } => {
            commands::detector::compare_modes(&common, &data, &modes, &seeds)
        }
        Command::ThresholdAnalyze { common, instances, points, coefficient_sets } => {
            commands::analysis::threshold_analyze(&common, instances, points, coefficient_sets)
        }
        Command::ExportEmbeddings { common, diffusion, data, split, include_generated } => {
            commands::analysis::export_embeddings(&common, &diffusion, &data, &split, include_generated)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = serde_json::json!({
                "error": err.to_string(),
                "kind": err.kind(),
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
