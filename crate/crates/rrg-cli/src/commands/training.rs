//! SFT and GRPO training commands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rrg_core::corpus::{read_split, IMAGE_SIZE};
use rrg_core::model::{Model, Tokenizer};
use rrg_core::train::{run_grpo, run_sft};

use crate::artifacts::{load_bundle, save_model_config, MODEL_CONFIG_FILE, VOCAB_FILE};
use crate::config::{capped, RunConfig};
use crate::error::{CliError, Result};
use crate::{TrainGrpoArgs, TrainSftArgs};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub best_index: usize,
    pub best_snapshot: String,
    pub best_score: f64,
    pub val_scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SftSummary {
    pub best_snapshot: PathBuf,
    pub best_score: f64,
    pub vocab: PathBuf,
    pub model_config: PathBuf,
    pub val_scores: Vec<f64>,
}

fn base_config(path: &Option<PathBuf>, seed: u64) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    config.seed = seed;
    Ok(config)
}

/// Trains from scratch on the dataset's train split; the tokenizer, model
/// configuration, per-fifth-epoch checkpoints, and the selected best are
/// all written under `run`.
pub fn sft_into_dir(data: &Path, run: &Path, config: &RunConfig) -> Result<SftSummary> {
    let train = read_split(data, "train")?;
    let validation = read_split(data, "validation")?;
    if train.is_empty() || validation.is_empty() {
        return Err(CliError::Invalid(
            "dataset has an empty train or validation split".into(),
        ));
    }
    std::fs::create_dir_all(run)?;

    let tokenizer = Tokenizer::build(&train);
    let vocab = run.join(VOCAB_FILE);
    tokenizer.save(&vocab)?;
    let model_config = config.model_config(tokenizer.vocab_size());
    let model_config_path = run.join(MODEL_CONFIG_FILE);
    save_model_config(&model_config, &model_config_path)?;

    let model = Model::new(&model_config, IMAGE_SIZE)?;
    let outcome = run_sft(
        &model,
        &tokenizer,
        &train,
        capped(&validation, config.limits.sft_validation),
        &config.sft,
        &config.reward,
        run,
        config.seed,
    )?;

    let record = CheckpointRecord {
        best_index: outcome.best,
        best_snapshot: outcome.checkpoints[outcome.best]
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned(),
        best_score: outcome.val_scores[outcome.best],
        val_scores: outcome.val_scores.clone(),
    };
    let text = serde_json::to_string_pretty(&record)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    std::fs::write(run.join("checkpoint.json"), text)?;

    Ok(SftSummary {
        best_snapshot: outcome.checkpoints[outcome.best].clone(),
        best_score: outcome.val_scores[outcome.best],
        vocab,
        model_config: model_config_path,
        val_scores: outcome.val_scores,
    })
}

pub fn train_sft(args: &TrainSftArgs) -> Result<SftSummary> {
    let mut config = base_config(&args.config, args.seed)?;
    if let Some(v) = args.epochs {
        config.sft.epochs = v;
    }
    if let Some(v) = args.batch_size {
        config.sft.batch_size = v;
    }
    if let Some(v) = args.peak_lr {
        config.sft.peak_lr = v;
    }
    if let Some(v) = args.warmup_steps {
        config.sft.warmup_steps = v;
    }
    if let Some(v) = args.cycles {
        config.sft.cycles = v;
    }
    if args.val_limit.is_some() {
        config.limits.sft_validation = args.val_limit;
    }
    let summary = sft_into_dir(&args.data, &args.run, &config)?;
    println!(
        "best checkpoint {} with validation reward {:.6}",
        summary.best_snapshot.display(),
        summary.best_score
    );
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct GrpoSummary {
    pub final_snapshot: PathBuf,
    pub val_scores: Vec<f64>,
}

/// GRPO from `init`; the frozen reference is loaded from the same snapshot.
pub fn grpo_into_dir(
    data: &Path,
    run: &Path,
    init: &Path,
    vocab: &Path,
    model_config: &Path,
    config: &RunConfig,
) -> Result<GrpoSummary> {
    let train = read_split(data, "train")?;
    let validation = read_split(data, "validation")?;
    let (_, tokenizer, model) = load_bundle(model_config, vocab, init, IMAGE_SIZE)?;
    let (_, _, reference) = load_bundle(model_config, vocab, init, IMAGE_SIZE)?;
    let outcome = run_grpo(
        &model,
        &reference,
        &tokenizer,
        capped(&train, config.limits.grpo_prompts),
        capped(&validation, config.limits.grpo_validation),
        &config.grpo,
        run,
        config.seed,
    )?;
    let summary = serde_json::json!({
        "final_snapshot": outcome.final_snapshot.file_name()
            .unwrap_or_default().to_string_lossy(),
        "val_scores": outcome.val_scores,
        "skipped_groups": outcome.skipped_groups,
    });
    std::fs::write(
        run.join("grpo_summary.json"),
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Invalid(e.to_string()))?,
    )?;
    Ok(GrpoSummary {
        final_snapshot: outcome.final_snapshot,
        val_scores: outcome.val_scores,
    })
}

pub fn train_grpo(args: &TrainGrpoArgs) -> Result<GrpoSummary> {
    let mut config = base_config(&args.config, args.seed)?;
    if let Some(v) = args.epochs {
        config.grpo.epochs = v;
    }
    if let Some(v) = args.group_size {
        config.grpo.group_size = v;
    }
    if args.prompt_limit.is_some() {
        config.limits.grpo_prompts = args.prompt_limit;
    }
    if args.val_limit.is_some() {
        config.limits.grpo_validation = args.val_limit;
    }
    let summary = grpo_into_dir(
        &args.data,
        &args.run,
        &args.init,
        &args.vocab,
        &args.model_config,
        &config,
    )?;
    println!(
        "final snapshot {} ({} validation points)",
        summary.final_snapshot.display(),
        summary.val_scores.len()
    );
    Ok(summary)
}
