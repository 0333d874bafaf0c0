//! Supervised fine-tuning: token-level cross-entropy over generated
//! positions with AdamW updates, plus the validation helpers used for
//! checkpoint selection.

use serde::{Deserialize, Serialize};

use crate::corpus::StudyRecord;
use crate::error::{CoreError, Result};
use crate::model::{
    assemble_prompt, generate, target_tokens, DecodeMode, InferSession, Model, PromptBundle,
    Tokenizer,
};
use crate::numkit::ops;
use crate::rewards::{weighted_score, RewardSpec};

use super::grpo::{completion_validity_mask, score_completion};
use super::optim::{zero_grads, AdamW};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SFTConfig {
    pub peak_lr: f64,
    pub warmup_steps: usize,
    pub epochs: usize,
    pub cycles: usize,
    pub batch_size: usize,
    pub checkpoint_metric: String,
}

impl SFTConfig {
    /// Published defaults.
    pub fn paper() -> Self {
        SFTConfig {
            peak_lr: 5e-5,
            warmup_steps: 500,
            epochs: 5,
            cycles: 5,
            batch_size: 16,
            checkpoint_metric: "composite".into(),
        }
    }

    /// Desk-scale defaults.
    pub fn toy() -> Self {
        SFTConfig {
            peak_lr: 3e-3,
            warmup_steps: 30,
            epochs: 3,
            cycles: 3,
            batch_size: 8,
            checkpoint_metric: "composite".into(),
        }
    }
}

/// One gradient step over a teacher-forced batch. Returns the batch loss.
pub fn sft_step(
    model: &Model,
    batch: &[(PromptBundle, Vec<usize>)],
    optimiser: &mut AdamW,
    lr: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(CoreError::InvalidArgument("empty batch".into()));
    }
    let mut losses = Vec::with_capacity(batch.len());
    for (bundle, targets) in batch {
        let logits = model.decoder_forward(bundle, targets)?;
        let pred = ops::slice_rows(&logits, 0, targets.len())?;
        let mask = vec![1u8; targets.len()];
        losses.push(ops::cross_entropy(&pred, targets, &mask)?);
    }
    let mut acc = losses[0].clone();
    for l in &losses[1..] {
        acc = ops::add(&acc, l)?;
    }
    let loss = ops::scale(&acc, 1.0 / batch.len() as f64)?;
    let value = loss.value().item();
    zero_grads(&model.parameters());
    loss.backward()?;
    optimiser.step(&model.parameters(), lr)?;
    Ok(value)
}

/// Fraction of target tokens predicted correctly under teacher forcing.
pub fn teacher_forced_accuracy(
    model: &Model,
    tokenizer: &Tokenizer,
    studies: &[StudyRecord],
    seed: u64,
) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for study in studies {
        let bundle = assemble_prompt(study, model, tokenizer, seed)?;
        let targets = target_tokens(study, tokenizer, &model.config)?;
        let mut session = InferSession::start(model, &bundle)?;
        for (i, &t) in targets.iter().enumerate() {
            let logits = session.logits();
            let mut best = 0;
            for (c, &v) in logits.iter().enumerate() {
                if v > logits[best] {
                    best = c;
                }
            }
            if best == t {
                correct += 1;
            }
            total += 1;
            if i + 1 < targets.len() {
                session.push(t)?;
            }
        }
    }
    Ok(correct as f64 / total.max(1) as f64)
}

/// Mean weighted composite reward of greedy decodes over `studies`.
pub fn validation_reward(
    model: &Model,
    tokenizer: &Tokenizer,
    studies: &[StudyRecord],
    spec: &RewardSpec,
    seed: u64,
) -> Result<f64> {
    if studies.is_empty() {
        return Err(CoreError::InvalidArgument("empty validation set".into()));
    }
    let mut sum = 0.0;
    for study in studies {
        let bundle = assemble_prompt(study, model, tokenizer, seed)?;
        let emitted = generate(
            model,
            &bundle,
            DecodeMode::Greedy,
            model.config.max_generated,
            seed,
        )?;
        let mut completion = vec![model.config.bos_id];
        completion.extend(emitted);
        let (valid, _) = completion_validity_mask(&completion, &model.config);
        let rewards =
            score_completion(&completion, valid, study, tokenizer, &model.config, spec)?;
        sum += weighted_score(&rewards, spec);
    }
    Ok(sum / studies.len() as f64)
}
