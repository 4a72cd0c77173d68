//! Command-line front end.
//!
//! Exit statuses: 0 success, 1 internal error, 2 input error, 3 missing
//! prerequisite stage.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use commands::{
    EnsembleMetrics, EvaluationRecord, InputSet, ModelVariant, Selection, SplitScores,
    WeightSource, WeightsArg, WeightsFile,
};
pub use config::{DecompositionConfig, EnsembleConfig, ExperimentConfig, ModelConfig, SourceSpec};
pub use manifest::{RunManifest, StageRecord, MANIFEST_FILE};

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(
    name = "oilcast",
    version,
    about = "Brent price forecasting experiments"
)]
pub struct Cli {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "OILCAST_OUT")]
    pub out: Option<PathBuf>,
    /// Train the three ensemble scenarios concurrently.
    #[arg(long, global = true)]
    pub parallel_scenarios: bool,
    #[arg(long, global = true)]
    pub window: Option<usize>,
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    /// Feature-selection threshold on |Spearman rho|.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true)]
    pub max_epochs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest, align, interpolate, scale and decompose the sources.
    Prepare,
    /// Rank candidate features by Spearman correlation with the target.
    Select,
    /// Train one model variant and evaluate it on the test split.
    Train {
        /// gru, lstm, bi-gru, bi-lstm, optionally prefixed with sent- or ext-.
        model: ModelVariant,
    },
    /// Train the three scenarios, fit fusion weights, evaluate the ensemble.
    Ensemble {
        /// Skip the search: `w1,w2,w3` or a weights JSON file.
        #[arg(long)]
        weights: Option<WeightsArg>,
    },
    /// Benchmark every evaluated model and write plot data.
    Report,
}

#[derive(Debug)]
pub enum CliError {
    Stage {
        stage: &'static str,
        source: Error,
    },
    Prerequisite {
        stage: &'static str,
        missing: PathBuf,
    },
    Config(Error),
}

impl CliError {
    fn stage(stage: &'static str, source: Error) -> Self {
        Self::Stage { stage, source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Stage { source, .. } | Self::Config(source) => error_code(source),
            Self::Prerequisite { .. } => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Stage { stage, source } => write!(f, "{stage}: {source}"),
            Self::Prerequisite { stage, missing } => {
                write!(f, "missing {}; run `{stage}` first", missing.display())
            }
            Self::Config(e) => write!(f, "config: {e}"),
        }
    }
}

/// 2 for problems with inputs or parameters, 1 for everything else.
fn error_code(e: &Error) -> u8 {
    match e {
        Error::Scenario { source, .. } => error_code(source),
        Error::Io { .. }
        | Error::Ingest { .. }
        | Error::Preparation(_)
        | Error::UndefinedCorrelation(_)
        | Error::Parameter(_)
        | Error::MissingColumn(_)
        | Error::Json(_)
        | Error::Csv(_) => 2,
        _ => 1,
    }
}

fn context(cli: &Cli) -> Result<commands::Context, CliError> {
    let (mut config, base_dir) = match &cli.config {
        Some(path) => {
            let config = ExperimentConfig::load(path).map_err(CliError::Config)?;
            let base = path.parent().map(PathBuf::from).unwrap_or_default();
            (config, base)
        }
        None => (ExperimentConfig::default(), PathBuf::new()),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(w) = cli.window {
        config.window = w;
    }
    if let Some(h) = cli.horizon {
        config.horizon = h;
    }
    if let Some(t) = cli.threshold {
        config.selection_threshold = t;
    }
    if let Some(m) = cli.max_epochs {
        config.train.max_epochs = m;
    }
    config.validate().map_err(CliError::Config)?;
    let out = cli
        .out
        .clone()
        .or_else(|| config.out_dir.as_ref().map(|d| base_dir.join(d)))
        .unwrap_or_else(|| PathBuf::from("runs"));
    Ok(commands::Context {
        config,
        base_dir,
        out,
        parallel_scenarios: cli.parallel_scenarios,
    })
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let ctx = context(cli)?;
    match &cli.command {
        Command::Prepare => commands::prepare(&ctx),
        Command::Select => commands::select(&ctx),
        Command::Train { model } => commands::train_model(&ctx, *model),
        Command::Ensemble { weights } => commands::ensemble(&ctx, weights.as_ref()),
        Command::Report => commands::report(&ctx),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
