//! `rrg`: corpus generation, SFT/GRPO training, report generation,
//! evaluation metrics, and the rater statistics, glued into resumable runs.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "rrg", version, about = "Radiology report generation workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic study corpus and write train/validation/test splits
    GenData(GenDataArgs),
    /// Supervised fine-tuning from scratch on a dataset directory
    TrainSft(TrainSftArgs),
    /// GRPO from a supervised checkpoint with a frozen reference
    TrainGrpo(TrainGrpoArgs),
    /// Decode reports for a split with a trained snapshot
    Generate(GenerateArgs),
    /// Score generated reports against references, with significance tests
    EvalMetrics(EvalMetricsArgs),
    /// Attention-complexity ratios of prompt lengths against a baseline
    Complexity(ComplexityArgs),
    /// Rater-study statistics
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Full resumable pipeline: gen-data, train-sft, train-grpo, eval-metrics
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Output dataset directory
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub studies: usize,
    #[arg(long)]
    pub seed: u64,
    /// Probability that a study carries a prior examination
    #[arg(long, default_value_t = 0.3)]
    pub prior_prob: f64,
    /// Train,validation,test fractions
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub fractions: String,
}

#[derive(Debug, Args)]
pub struct TrainSftArgs {
    /// Dataset directory written by gen-data
    #[arg(long)]
    pub data: PathBuf,
    /// Run directory for checkpoints and logs
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Optional TOML config; flags below override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub peak_lr: Option<f64>,
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    #[arg(long)]
    pub cycles: Option<usize>,
    /// Cap on validation studies per checkpoint evaluation
    #[arg(long)]
    pub val_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainGrpoArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub run: PathBuf,
    /// Initial policy snapshot (also the frozen reference)
    #[arg(long)]
    pub init: PathBuf,
    /// Vocabulary file saved by train-sft
    #[arg(long)]
    pub vocab: PathBuf,
    /// Model configuration saved by train-sft
    #[arg(long)]
    pub model_config: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub group_size: Option<usize>,
    /// Cap on training prompts per epoch
    #[arg(long)]
    pub prompt_limit: Option<usize>,
    #[arg(long)]
    pub val_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub model_config: PathBuf,
    /// Output JSONL of generated reports
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub limit: Option<usize>,
    /// Sample instead of greedy decoding
    #[arg(long)]
    pub sample: bool,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
}

#[derive(Debug, Args)]
pub struct EvalMetricsArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Repeatable name=reports.jsonl pair
    #[arg(long = "model", required = true)]
    pub models: Vec<String>,
    /// Output directory for metrics.tsv and metrics.json
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ComplexityArgs {
    /// Comma-separated prompt lengths
    #[arg(long)]
    pub lens: String,
    /// Baseline sequence length
    #[arg(long)]
    pub baseline: usize,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Exact binomial test
    Binom(BinomArgs),
    /// Exact power of the one-sided binomial test
    Power(PowerArgs),
    /// Fleiss' kappa over a ratings file
    Kappa(KappaArgs),
    /// Logistic GLM of acceptability over a ratings file
    Glm(GlmArgs),
}

#[derive(Debug, Args)]
pub struct BinomArgs {
    #[arg(long)]
    pub k: u64,
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub p0: f64,
    #[arg(long, default_value = "two-sided")]
    pub alternative: String,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub p0: f64,
    #[arg(long)]
    pub p1: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct KappaArgs {
    /// Tab-separated ratings: rater, study, preference, reasons, findings
    #[arg(long)]
    pub ratings: PathBuf,
    /// Also print the rater-pair table
    #[arg(long)]
    pub pairwise: bool,
}

#[derive(Debug, Args)]
pub struct GlmArgs {
    #[arg(long)]
    pub ratings: PathBuf,
    /// Also print the Type I analysis-of-deviance table
    #[arg(long)]
    pub anova: bool,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// TOML run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Run directory; stages already recorded in its manifest are skipped
    #[arg(long)]
    pub run: PathBuf,
    /// Overrides the seed from the config file
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData(args) => commands::data::gen_data(&args),
        Command::TrainSft(args) => commands::training::train_sft(&args).map(|_| ()),
        Command::TrainGrpo(args) => commands::training::train_grpo(&args).map(|_| ()),
        Command::Generate(args) => commands::evaluate::generate_reports(&args),
        Command::EvalMetrics(args) => commands::evaluate::eval_metrics(&args).map(|_| ()),
        Command::Complexity(args) => commands::evaluate::complexity(&args),
        Command::Stats(cmd) => commands::statistics::run(&cmd),
        Command::Pipeline(args) => commands::pipeline::run_pipeline(&args).map(|_| ()),
    }
}

/// Parses and executes, mapping outcomes to exit codes: 0 success,
/// 1 domain error, 2 usage error.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
