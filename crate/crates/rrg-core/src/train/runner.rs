//! Training loops and run-directory emission: config snapshots, TSV metric
//! logs, and parameter snapshots.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::StudyRecord;
use crate::error::{CoreError, Result};
use crate::model::{assemble_prompt, target_tokens, Model, Tokenizer};
use crate::numkit::snapshot::{apply_snapshot, load_snapshot, save_snapshot};
use crate::rewards::RewardSpec;

use super::grpo::{grpo_outer_step, select_checkpoint, GRPOConfig};
use super::optim::AdamW;
use super::schedule::lr_schedule;
use super::sft::{sft_step, validation_reward, SFTConfig};

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    save_snapshot(&model.parameters(), path)
}

pub fn load_model_into(model: &Model, path: &Path) -> Result<()> {
    let entries = load_snapshot(path)?;
    apply_snapshot(&model.parameters(), &entries)
}

/// Steps (0-based) after which a fifth-of-an-epoch boundary is crossed.
pub fn validation_points(steps_per_epoch: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for s in 0..steps_per_epoch {
        if (5 * (s + 1)) / steps_per_epoch > (5 * s) / steps_per_epoch {
            out.push(s);
        }
    }
    out
}

fn append_log(path: &Path, line: &str) -> Result<()> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    writeln!(f, "{line}")?;
    Ok(())
}

fn write_config_snapshot<T: serde::Serialize>(run_dir: &Path, name: &str, config: &T) -> Result<()> {
    let f = std::fs::File::create(run_dir.join(name))?;
    serde_json::to_writer_pretty(f, config)
        .map_err(|e| CoreError::Serialization(e.to_string()))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SftOutcome {
    pub checkpoints: Vec<PathBuf>,
    pub val_scores: Vec<f64>,
    pub best: usize,
}

/// SFT with cosine/hard-restart scheduling. Validates and checkpoints at
/// every fifth of an epoch; returns the checkpoint list with scores and the
/// selected best.
#[allow(clippy::too_many_arguments)]
pub fn run_sft(
    model: &Model,
    tokenizer: &Tokenizer,
    train: &[StudyRecord],
    validation: &[StudyRecord],
    config: &SFTConfig,
    reward: &RewardSpec,
    run_dir: &Path,
    seed: u64,
) -> Result<SftOutcome> {
    if train.is_empty() || validation.is_empty() {
        return Err(CoreError::InvalidArgument(
            "SFT needs non-empty train and validation sets".into(),
        ));
    }
    std::fs::create_dir_all(run_dir)?;
    write_config_snapshot(run_dir, "sft_config.json", config)?;
    let log = run_dir.join("sft_log.tsv");
    append_log(&log, "step\tepoch\tlr\tloss")?;

    let steps_per_epoch = train.len().div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.epochs;
    let warmup = config.warmup_steps.min(total_steps.saturating_sub(1));
    let val_points = validation_points(steps_per_epoch);

    let mut optimiser = AdamW::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checkpoints = Vec::new();
    let mut val_scores = Vec::new();
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);
        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut batch = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let bundle = assemble_prompt(&train[i], model, tokenizer, seed)?;
                let targets = target_tokens(&train[i], tokenizer, &model.config)?;
                batch.push((bundle, targets));
            }
            let lr = lr_schedule(step, total_steps, warmup, config.peak_lr, config.cycles)?;
            let loss = sft_step(model, &batch, &mut optimiser, lr)?;
            append_log(&log, &format!("{step}\t{epoch}\t{lr}\t{loss}"))?;
            if val_points.contains(&bi) {
                let score = validation_reward(model, tokenizer, validation, reward, seed)?;
                let path = run_dir.join(format!("sft_ckpt_{}.bin", checkpoints.len()));
                save_model(model, &path)?;
                append_log(
                    &run_dir.join("sft_val.tsv"),
                    &format!("{}\t{step}\t{score}", checkpoints.len()),
                )?;
                checkpoints.push(path);
                val_scores.push(score);
            }
            step += 1;
        }
    }
    let best = select_checkpoint(&val_scores)?;
    Ok(SftOutcome {
        checkpoints,
        val_scores,
        best,
    })
}

#[derive(Debug, Clone)]
pub struct GrpoOutcome {
    pub val_scores: Vec<f64>,
    pub final_snapshot: PathBuf,
    pub skipped_groups: usize,
}

/// GRPO from the given policy with a frozen reference. Only decoder
/// parameters are updated; validation runs at every fifth of an epoch.
#[allow(clippy::too_many_arguments)]
pub fn run_grpo(
    model: &Model,
    reference: &Model,
    tokenizer: &Tokenizer,
    train: &[StudyRecord],
    validation: &[StudyRecord],
    config: &GRPOConfig,
    run_dir: &Path,
    seed: u64,
) -> Result<GrpoOutcome> {
    if train.is_empty() || validation.is_empty() {
        return Err(CoreError::InvalidArgument(
            "GRPO needs non-empty train and validation sets".into(),
        ));
    }
    std::fs::create_dir_all(run_dir)?;
    write_config_snapshot(run_dir, "grpo_config.json", config)?;
    let log = run_dir.join("grpo_log.tsv");
    append_log(
        &log,
        "step\tepoch\tlr\tloss\tmean_reward\tmean_kl\tinvalid_fraction",
    )?;

    let batches_per_epoch = train.len().div_ceil(config.batch_prompts);
    let val_points = validation_points(batches_per_epoch);

    let mut optimiser = AdamW::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6772706f);
    let mut val_scores = Vec::new();
    let mut skipped = 0usize;
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);
        for (bi, chunk) in order.chunks(config.batch_prompts).enumerate() {
            let prompts: Vec<&StudyRecord> = chunk.iter().map(|&i| &train[i]).collect();
            let lr = if config.warmup_steps > 0 {
                config.learning_rate * ((step + 1) as f64 / config.warmup_steps as f64).min(1.0)
            } else {
                config.learning_rate
            };
            let diag = grpo_outer_step(
                model,
                reference,
                &prompts,
                tokenizer,
                config,
                &mut optimiser,
                lr,
                seed.wrapping_add(step as u64 * 7919),
            )?;
            skipped += diag.skipped_groups;
            let loss = diag.losses.first().copied().unwrap_or(f64::NAN);
            append_log(
                &log,
                &format!(
                    "{step}\t{epoch}\t{lr}\t{loss}\t{}\t{}\t{}",
                    diag.mean_weighted_reward, diag.mean_kl, diag.invalid_fraction
                ),
            )?;
            if val_points.contains(&bi) {
                let score =
                    validation_reward(model, tokenizer, validation, &config.reward, seed)?;
                append_log(&run_dir.join("grpo_val.tsv"), &format!("{step}\t{score}"))?;
                val_scores.push(score);
            }
            step += 1;
        }
    }
    let final_snapshot = run_dir.join("grpo_final.bin");
    save_model(model, &final_snapshot)?;
    Ok(GrpoOutcome {
        val_scores,
        final_snapshot,
        skipped_groups: skipped,
    })
}
