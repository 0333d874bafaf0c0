//! The full network and its graph-mode forward pass.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::numkit::{ops, Parameter, Var};

use super::blocks::Block;
use super::config::ModelConfig;
use super::embed::{time_delta_embedding, SourceId, N_SOURCES};
use super::encoder::make_patch_projection;
use super::init::{init_matrix, ones};
use super::prompt::{PromptBundle, PromptContent};
use super::qadapter::QAdapter;

pub struct Model {
    pub config: ModelConfig,
    pub tok_embed: Parameter,
    pub src_embed: Parameter,
    pub td_w1: Parameter,
    pub td_w2: Parameter,
    /// Frozen patch-encoder projection.
    pub patch_proj: Parameter,
    pub adapter: QAdapter,
    pub(crate) decoder_layers: Vec<Block>,
    pub final_norm: Parameter,
    pub lm_head: Parameter,
}

impl Model {
    pub fn new(config: &ModelConfig, image_size: usize) -> Result<Model> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let proj = make_patch_projection(config, image_size)?;
        Ok(Model {
            config: config.clone(),
            tok_embed: Parameter::new(
                "tok_embed",
                init_matrix(&mut rng, config.vocab_size, config.d_model),
            ),
            src_embed: Parameter::new(
                "src_embed",
                init_matrix(&mut rng, N_SOURCES, config.d_model),
            ),
            td_w1: Parameter::new("td_w1", init_matrix(&mut rng, 1, config.td_inner)),
            td_w2: Parameter::new(
                "td_w2",
                init_matrix(&mut rng, config.td_inner, config.d_model),
            ),
            patch_proj: Parameter::frozen("patch_proj", proj),
            adapter: QAdapter::new(config, &mut rng),
            decoder_layers: (0..config.layers)
                .map(|i| {
                    Block::new(
                        &format!("decoder.layer{i}"),
                        config.d_model,
                        config.d_ff,
                        &mut rng,
                    )
                })
                .collect(),
            final_norm: Parameter::new("final_norm", ones(config.d_model)),
            lm_head: Parameter::new(
                "lm_head",
                init_matrix(&mut rng, config.d_model, config.vocab_size),
            ),
        })
    }

    /// Every parameter, frozen ones included.
    pub fn parameters(&self) -> Vec<Parameter> {
        let mut ps = vec![
            self.tok_embed.clone(),
            self.src_embed.clone(),
            self.td_w1.clone(),
            self.td_w2.clone(),
            self.patch_proj.clone(),
        ];
        ps.extend(self.adapter.parameters());
        for l in &self.decoder_layers {
            ps.extend(l.parameters());
        }
        ps.push(self.final_norm.clone());
        ps.push(self.lm_head.clone());
        ps
    }

    /// The decoder proper: transformer layers, final norm, output head, and
    /// the token embedding they read from.
    pub fn decoder_parameters(&self) -> Vec<Parameter> {
        let mut ps = vec![self.tok_embed.clone()];
        for l in &self.decoder_layers {
            ps.extend(l.parameters());
        }
        ps.push(self.final_norm.clone());
        ps.push(self.lm_head.clone());
        ps
    }

    /// Source id carried by each generated token: findings up to and
    /// including the separator, impression afterwards.
    pub fn generated_sources(&self, generated: &[usize]) -> Vec<SourceId> {
        let mut seen_sep = false;
        let mut out = Vec::with_capacity(generated.len());
        for &t in generated {
            out.push(if seen_sep {
                SourceId::GeneratedImpression
            } else {
                SourceId::GeneratedFindings
            });
            if t == self.config.sep_id {
                seen_sep = true;
            }
        }
        out
    }

    fn embed_token(&self, id: usize) -> Result<Var> {
        ops::gather_rows(&self.tok_embed.var, &[id])
    }

    fn embed_source(&self, s: SourceId) -> Result<Var> {
        ops::gather_rows(&self.src_embed.var, &[s.index()])
    }

    /// Forward pass over prompt + generated tokens. Returns logits at the
    /// position preceding the first generated token followed by every
    /// generated position: (T+1) x vocab.
    pub fn decoder_forward(&self, bundle: &PromptBundle, generated: &[usize]) -> Result<Var> {
        let l = bundle.len();
        let t = generated.len();
        if l == 0 {
            return Err(CoreError::InvalidArgument("empty prompt".into()));
        }
        if l + t > 4096 {
            return Err(CoreError::InvalidArgument(format!(
                "sequence length {} exceeds the supported maximum",
                l + t
            )));
        }

        // one time-delta embedding per distinct delta
        let mut td_cache: HashMap<u64, Var> = HashMap::new();
        let mut td_for = |delta: f64| -> Result<Var> {
            match td_cache.entry(delta.to_bits()) {
                std::collections::hash_map::Entry::Occupied(e) => Ok(e.get().clone()),
                std::collections::hash_map::Entry::Vacant(e) => {
                    let v = time_delta_embedding(delta, &self.td_w1.var, &self.td_w2.var)?;
                    Ok(e.insert(v).clone())
                }
            }
        };

        let mut rows = Vec::with_capacity(l + t);
        let mut pos_ids = Vec::with_capacity(l + t);
        for p in &bundle.positions {
            let content = match &p.content {
                PromptContent::Token(id) => self.embed_token(*id)?,
                PromptContent::Image(v) => v.clone(),
            };
            let row = ops::add(
                &ops::add(&content, &self.embed_source(p.source)?)?,
                &td_for(p.delta_seconds)?,
            )?;
            rows.push(row);
            pos_ids.push(p.position_id);
        }
        let gen_sources = self.generated_sources(generated);
        for (i, (&id, &src)) in generated.iter().zip(&gen_sources).enumerate() {
            let row = ops::add(
                &ops::add(&self.embed_token(id)?, &self.embed_source(src)?)?,
                &td_for(0.0)?,
            )?;
            rows.push(row);
            pos_ids.push(l + i);
        }

        let mut x = ops::concat_rows(&rows)?;
        let allowed = hybrid_attention_mask(l, t);
        for layer in &self.decoder_layers {
            x = layer.forward(
                &x,
                self.config.heads,
                &pos_ids,
                self.config.rotary_base,
                &allowed,
            )?;
        }
        let x = ops::rms_norm(&x, &self.final_norm.var)?;

        // storage row holding the largest prompt position id
        let anchor = bundle
            .positions
            .iter()
            .position(|p| p.position_id == l - 1)
            .ok_or_else(|| CoreError::InvalidArgument("prompt position ids not 0..L-1".into()))?;
        let head_in = if t == 0 {
            ops::slice_rows(&x, anchor, anchor + 1)?
        } else {
            ops::concat_rows(&[
                ops::slice_rows(&x, anchor, anchor + 1)?,
                ops::slice_rows(&x, l, l + t)?,
            ])?
        };
        ops::matmul(&head_in, &self.lm_head.var)
    }
}

/// Bidirectional over the prompt, causal over generated positions.
pub fn hybrid_attention_mask(l: usize, t: usize) -> Vec<Vec<bool>> {
    let n = l + t;
    let mut mask = vec![vec![false; n]; n];
    for (i, row) in mask.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = if i < l { j < l } else { j < l || j <= i };
        }
    }
    mask
}

/// Splits a completion at its separator, dropping BOS/SEP/EOS.
pub fn split_sections(
    tokens: &[usize],
    config: &ModelConfig,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let sep_count = tokens.iter().filter(|&&t| t == config.sep_id).count();
    if sep_count == 0 {
        return Err(CoreError::InvalidCompletion("no separator token".into()));
    }
    if sep_count > 1 {
        return Err(CoreError::InvalidCompletion(
            "multiple separator tokens".into(),
        ));
    }
    if !tokens.contains(&config.eos_id) {
        return Err(CoreError::InvalidCompletion("missing end token".into()));
    }
    let sep_at = tokens.iter().position(|&t| t == config.sep_id).unwrap();
    let eos_at = tokens.iter().position(|&t| t == config.eos_id).unwrap();
    let strip = |slice: &[usize]| -> Vec<usize> {
        slice
            .iter()
            .copied()
            .filter(|&t| t != config.bos_id && t != config.pad_id)
            .collect()
    };
    let findings = strip(&tokens[..sep_at]);
    let impression = if eos_at > sep_at {
        strip(&tokens[sep_at + 1..eos_at])
    } else {
        Vec::new()
    };
    Ok((findings, impression))
}

/// Self-attention cost of a prompt relative to a baseline: (L/L0)^2,
/// returned with the complementary reduction fraction.
pub fn relative_complexity(prompt_len: usize, baseline_len: usize) -> Result<(f64, f64)> {
    if baseline_len == 0 {
        return Err(CoreError::InvalidArgument(
            "baseline length must be positive".into(),
        ));
    }
    let ratio = (prompt_len as f64 / baseline_len as f64).powi(2);
    Ok((ratio, 1.0 - ratio))
}
