//! Group relative policy optimisation: validity masking, group-normalised
//! advantages, the clipped surrogate with a KL penalty, and the outer
//! sampling / inner optimisation loop.

use serde::{Deserialize, Serialize};

use crate::corpus::StudyRecord;
use crate::error::{CoreError, Result};
use crate::model::{
    assemble_prompt, generate, DecodeMode, Model, ModelConfig, Tokenizer,
};
use crate::numkit::{ops, Array, Var};
use crate::rewards::{
    composite_reward, weighted_score, zero_reward, ReportSections, RewardSpec,
};

use super::optim::{zero_grads, AdamW};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GRPOConfig {
    pub group_size: usize,
    pub kl_beta: f64,
    pub clip_eps: f64,
    pub inner_steps: usize,
    pub temperature: f64,
    pub max_completion_tokens: usize,
    pub learning_rate: f64,
    pub warmup_steps: usize,
    pub epochs: usize,
    pub batch_prompts: usize,
    #[serde(default)]
    pub reward: RewardSpec,
}

impl Default for GRPOConfig {
    fn default() -> Self {
        GRPOConfig {
            group_size: 4,
            kl_beta: 0.04,
            clip_eps: 0.2,
            inner_steps: 3,
            temperature: 1.0,
            max_completion_tokens: 320,
            learning_rate: 1e-6,
            warmup_steps: 500,
            epochs: 2,
            batch_prompts: 8,
            reward: RewardSpec::default(),
        }
    }
}

impl GRPOConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(CoreError::InvalidArgument("group size must be >= 2".into()));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(CoreError::InvalidArgument("clip eps must lie in (0,1)".into()));
        }
        if self.kl_beta < 0.0 {
            return Err(CoreError::InvalidArgument("KL beta must be >= 0".into()));
        }
        if self.inner_steps == 0 {
            return Err(CoreError::InvalidArgument("inner steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Valid iff the completion holds exactly one BOS, one SEP, and one EOS.
/// Valid completions mask only padding; invalid ones get all-zero masks.
pub fn completion_validity_mask(tokens: &[usize], config: &ModelConfig) -> (bool, Vec<u8>) {
    let count = |id: usize| tokens.iter().filter(|&&t| t == id).count();
    let valid = count(config.bos_id) == 1 && count(config.sep_id) == 1 && count(config.eos_id) == 1;
    let mask = if valid {
        tokens
            .iter()
            .map(|&t| u8::from(t != config.pad_id))
            .collect()
    } else {
        vec![0; tokens.len()]
    };
    (valid, mask)
}

/// Per component: (r - mean)/sigma with population sigma; degenerate columns
/// contribute zero. Returns the weighted sum per group member.
pub fn group_normalised_advantages(rewards: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let g = rewards.len();
    if g == 0 {
        return Vec::new();
    }
    let k = weights.len();
    debug_assert!(rewards.iter().all(|r| r.len() == k));
    let mut advantages = vec![0.0; g];
    for (col, &w) in weights.iter().enumerate() {
        let mean = rewards.iter().map(|r| r[col]).sum::<f64>() / g as f64;
        let var = rewards
            .iter()
            .map(|r| (r[col] - mean).powi(2))
            .sum::<f64>()
            / g as f64;
        let sigma = var.sqrt();
        if sigma == 0.0 {
            continue;
        }
        for (a, r) in advantages.iter_mut().zip(rewards) {
            *a += w * (r[col] - mean) / sigma;
        }
    }
    advantages
}

/// Unbiased non-negative estimator ratio - log ratio - 1 with
/// ratio = exp(logp_ref - logp_theta).
pub fn kl_estimate(logp_theta: &[f64], logp_ref: &[f64]) -> Result<Vec<f64>> {
    if logp_theta.len() != logp_ref.len() {
        return Err(CoreError::InvalidArgument("misaligned token streams".into()));
    }
    logp_theta
        .iter()
        .zip(logp_ref)
        .map(|(&t, &r)| {
            if !t.is_finite() || !r.is_finite() {
                return Err(CoreError::NonFinite("kl_estimate log-probability".into()));
            }
            Ok((r - t).exp() - (r - t) - 1.0)
        })
        .collect()
}

/// The GRPO objective over one group, differentiable in `logp_theta`.
/// `logp_theta[i]` is a length-T_i vector Var of per-token log-probs.
pub fn grpo_loss(
    logp_theta: &[Var],
    logp_old: &[Vec<f64>],
    logp_ref: &[Vec<f64>],
    advantages: &[f64],
    masks: &[Vec<u8>],
    beta: f64,
    eps: f64,
) -> Result<Var> {
    let total_mask: f64 = masks
        .iter()
        .flat_map(|m| m.iter())
        .map(|&m| m as f64)
        .sum();
    if total_mask == 0.0 {
        return Err(CoreError::InvalidArgument(
            "entire group invalid: all-zero mask".into(),
        ));
    }
    let mut terms = Vec::new();
    for i in 0..logp_theta.len() {
        let lp = &logp_theta[i];
        let t = lp.value().len();
        if logp_old[i].len() != t || logp_ref[i].len() != t || masks[i].len() != t {
            return Err(CoreError::InvalidArgument("misaligned token streams".into()));
        }
        let old = Var::constant(Array::from_vec(logp_old[i].clone()));
        let refv = Var::constant(Array::from_vec(logp_ref[i].clone()));
        let rho = ops::exp(&ops::sub(lp, &old)?)?;
        let unclipped = ops::scale(&rho, advantages[i])?;
        let clipped = ops::scale(&ops::clamp(&rho, 1.0 - eps, 1.0 + eps)?, advantages[i])?;
        let surrogate = ops::minimum(&unclipped, &clipped)?;
        // ratio - log ratio - 1 with ratio = exp(ref - theta)
        let ratio = ops::exp(&ops::sub(&refv, lp)?)?;
        let kl = ops::add_scalar(&ops::add(&ratio, &ops::sub(lp, &refv)?)?, -1.0)?;
        let term = ops::sub(&surrogate, &ops::scale(&kl, beta)?)?;
        let mask = Var::constant(Array::from_vec(
            masks[i].iter().map(|&m| m as f64).collect(),
        ));
        terms.push(ops::sum_all(&ops::mul(&term, &mask)?)?);
    }
    let mut acc = terms[0].clone();
    for t in &terms[1..] {
        acc = ops::add(&acc, t)?;
    }
    ops::scale(&acc, -1.0 / total_mask)
}

/// One sampled group with everything the inner steps need.
pub struct GroupSample {
    pub study_id: String,
    /// Completions including the leading BOS.
    pub completions: Vec<Vec<usize>>,
    pub masks: Vec<Vec<u8>>,
    pub valid: Vec<bool>,
    pub rewards: Vec<Vec<f64>>,
    pub advantages: Vec<f64>,
    pub logp_old: Vec<Vec<f64>>,
    pub logp_ref: Vec<Vec<f64>>,
}

/// Per-token log-probabilities of `completion` under `model`, teacher-forced.
pub fn sequence_logp(
    model: &Model,
    bundle: &crate::model::PromptBundle,
    completion: &[usize],
) -> Result<Vec<f64>> {
    let mut session = crate::model::InferSession::start(model, bundle)?;
    let mut out = Vec::with_capacity(completion.len());
    for (i, &tok) in completion.iter().enumerate() {
        let logits = session.logits();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|&v| (v - max).exp()).sum();
        out.push(logits[tok] - max - z.ln());
        if i + 1 < completion.len() {
            session.push(tok)?;
        }
    }
    Ok(out)
}

fn reference_sections(study: &StudyRecord) -> Result<ReportSections> {
    Ok(ReportSections::new(
        study
            .section("findings")
            .ok_or_else(|| CoreError::InvalidArgument("study lacks findings".into()))?,
        study
            .section("impression")
            .ok_or_else(|| CoreError::InvalidArgument("study lacks impression".into()))?,
    ))
}

/// Scores one completion: invalid ones get the zero vector.
pub fn score_completion(
    completion: &[usize],
    valid: bool,
    study: &StudyRecord,
    tokenizer: &Tokenizer,
    model_config: &ModelConfig,
    spec: &RewardSpec,
) -> Result<Vec<f64>> {
    if !valid {
        return Ok(zero_reward(spec));
    }
    let (findings, impression) = crate::model::split_sections(completion, model_config)?;
    let generated = ReportSections::new(
        tokenizer.decode(&findings),
        tokenizer.decode(&impression),
    );
    composite_reward(&generated, &reference_sections(study)?, spec)
}

#[derive(Debug, Clone, Default)]
pub struct GRPODiagnostics {
    pub prompts: usize,
    pub invalid_fraction: f64,
    pub mean_weighted_reward: f64,
    pub mean_kl: f64,
    pub losses: Vec<f64>,
    pub skipped_groups: usize,
}

/// Samples G completions per prompt under the current policy, freezes the
/// behaviour log-probs, then runs `inner_steps` gradient steps on the
/// decoder parameters only.
pub fn grpo_outer_step(
    model: &Model,
    reference: &Model,
    prompts: &[&StudyRecord],
    tokenizer: &Tokenizer,
    config: &GRPOConfig,
    optimiser: &mut AdamW,
    lr: f64,
    seed: u64,
) -> Result<GRPODiagnostics> {
    config.validate()?;
    let mut diag = GRPODiagnostics {
        prompts: prompts.len(),
        ..Default::default()
    };

    // --- sampling phase: policy is read-only ---
    let mut groups = Vec::new();
    let mut invalid = 0usize;
    let mut total = 0usize;
    let mut kl_sum = 0.0;
    let mut kl_count = 0usize;
    let mut reward_sum = 0.0;
    for (pi, study) in prompts.iter().enumerate() {
        let bundle = assemble_prompt(study, model, tokenizer, seed)?;
        let ref_bundle = assemble_prompt(study, reference, tokenizer, seed)?;
        let mut completions = Vec::new();
        let mut masks = Vec::new();
        let mut valids = Vec::new();
        let mut rewards = Vec::new();
        let mut logp_old = Vec::new();
        let mut logp_ref = Vec::new();
        for gi in 0..config.group_size {
            let sample_seed = seed
                .wrapping_mul(0x9e3779b97f4a7c15)
                .wrapping_add((pi * config.group_size + gi) as u64);
            let emitted = generate(
                model,
                &bundle,
                DecodeMode::Sample {
                    temperature: config.temperature,
                },
                config.max_completion_tokens,
                sample_seed,
            )?;
            let mut completion = vec![model.config.bos_id];
            completion.extend(emitted);
            let (valid, mask) = completion_validity_mask(&completion, &model.config);
            if !valid {
                invalid += 1;
            }
            total += 1;
            let r = score_completion(
                &completion,
                valid,
                study,
                tokenizer,
                &model.config,
                &config.reward,
            )?;
            reward_sum += weighted_score(&r, &config.reward);
            let lo = sequence_logp(model, &bundle, &completion)?;
            let lr_ = sequence_logp(reference, &ref_bundle, &completion)?;
            for (k, &m) in kl_estimate(&lo, &lr_)?.iter().zip(&mask) {
                if m != 0 {
                    kl_sum += k;
                    kl_count += 1;
                }
            }
            completions.push(completion);
            masks.push(mask);
            valids.push(valid);
            rewards.push(r);
            logp_old.push(lo);
            logp_ref.push(lr_);
        }
        let advantages = group_normalised_advantages(&rewards, &config.reward.weights());
        groups.push((
            GroupSample {
                study_id: study.study_id.clone(),
                completions,
                masks,
                valid: valids,
                rewards,
                advantages,
                logp_old,
                logp_ref,
            },
            *study,
        ));
    }
    diag.invalid_fraction = invalid as f64 / total.max(1) as f64;
    diag.mean_weighted_reward = reward_sum / total.max(1) as f64;
    diag.mean_kl = if kl_count > 0 { kl_sum / kl_count as f64 } else { 0.0 };

    // --- inner optimisation: trajectories, masks, advantages, logp_old fixed ---
    diag.skipped_groups = groups
        .iter()
        .filter(|(g, _)| g.masks.iter().all(|m| m.iter().all(|&x| x == 0)))
        .count();
    if diag.skipped_groups == groups.len() {
        return Ok(diag);
    }
    let decoder_params = model.decoder_parameters();
    let all_params = model.parameters();
    for _ in 0..config.inner_steps {
        let mut losses = Vec::new();
        for (group, study) in &groups {
            if group.masks.iter().all(|m| m.iter().all(|&x| x == 0)) {
                continue;
            }
            let bundle = assemble_prompt(study, model, tokenizer, seed)?;
            let logits_per: Result<Vec<Var>> = group
                .completions
                .iter()
                .map(|completion| {
                    let logits = model.decoder_forward(&bundle, completion)?;
                    let rows = completion.len();
                    let pred = ops::slice_rows(&logits, 0, rows)?;
                    ops::gather_log_softmax(&pred, completion)
                })
                .collect();
            let loss = grpo_loss(
                &logits_per?,
                &group.logp_old,
                &group.logp_ref,
                &group.advantages,
                &group.masks,
                config.kl_beta,
                config.clip_eps,
            )?;
            losses.push(loss);
        }
        let mut acc = losses[0].clone();
        for l in &losses[1..] {
            acc = ops::add(&acc, l)?;
        }
        let batch_loss = ops::scale(&acc, 1.0 / losses.len() as f64)?;
        diag.losses.push(batch_loss.value().item());
        zero_grads(&all_params);
        batch_loss.backward()?;
        optimiser.step(&decoder_params, lr)?;
    }
    Ok(diag)
}

/// Argmax of the monitored validation metric; earliest checkpoint on ties.
pub fn select_checkpoint(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return Err(CoreError::InvalidArgument("no checkpoints scored".into()));
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}
