//! Prompt assembly: ordering rules, source tagging, time deltas, and image
//! subsampling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{StudyImage, StudyRecord, View};
use crate::error::{CoreError, Result};
use crate::numkit::{ops, Var};

use super::embed::SourceId;
use super::encoder::encode_patches;
use super::net::Model;
use super::tokenizer::Tokenizer;

pub enum PromptContent {
    Token(usize),
    /// Adapter-compressed image feature row, 1 x d_model.
    Image(Var),
}

pub struct PromptPosition {
    pub content: PromptContent,
    pub source: SourceId,
    pub delta_seconds: f64,
    pub position_id: usize,
}

pub struct PromptBundle {
    pub positions: Vec<PromptPosition>,
}

impl PromptBundle {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Uniform without-replacement subsample of at most `limit` items,
/// original order preserved.
pub fn image_subsample<T: Clone>(items: &[T], limit: usize, seed: u64) -> Vec<T> {
    assert!(limit >= 1, "image_subsample: limit must be at least 1");
    if items.len() <= limit {
        return items.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..items.len()).collect();
    // partial Fisher-Yates: the first `limit` entries are the sample
    for i in 0..limit {
        let j = rng.gen_range(i..indices.len());
        indices.swap(i, j);
    }
    let mut chosen = indices[..limit].to_vec();
    chosen.sort_unstable();
    chosen.iter().map(|&i| items[i].clone()).collect()
}

/// Lateral views first so the frontal image sits nearest the generated
/// tokens; stable within each view.
fn order_views(images: &[StudyImage]) -> Vec<&StudyImage> {
    let mut out: Vec<&StudyImage> = images.iter().filter(|i| i.view == View::Lateral).collect();
    out.extend(images.iter().filter(|i| i.view == View::Frontal));
    out
}

fn push_text(
    out: &mut Vec<(PromptContent, SourceId, f64)>,
    tokenizer: &Tokenizer,
    text: &str,
    source: SourceId,
    delta: f64,
) -> Result<()> {
    for id in tokenizer.encode(text)? {
        out.push((PromptContent::Token(id), source, delta));
    }
    Ok(())
}

fn push_images(
    out: &mut Vec<(PromptContent, SourceId, f64)>,
    model: &Model,
    images: &[StudyImage],
    source: SourceId,
    delta: f64,
    seed: u64,
) -> Result<()> {
    let sampled = image_subsample(images, model.config.image_limit, seed);
    for img in order_views(&sampled) {
        let feats = encode_patches(&img.pixels, &model.config, &model.patch_proj.value())?;
        let rows = model.adapter.forward(&Var::constant(feats))?;
        for r in 0..model.config.n_q {
            out.push((
                PromptContent::Image(ops::slice_rows(&rows, r, r + 1)?),
                source,
                delta,
            ));
        }
    }
    Ok(())
}

/// Builds the prompt: prior inputs before study inputs, text sections before
/// images within a timepoint, lateral before frontal, position ids 0..L-1.
pub fn assemble_prompt(
    study: &StudyRecord,
    model: &Model,
    tokenizer: &Tokenizer,
    seed: u64,
) -> Result<PromptBundle> {
    let mut staged: Vec<(PromptContent, SourceId, f64)> = Vec::new();

    if let Some(prior) = &study.prior {
        if prior.timestamp >= study.timestamp {
            return Err(CoreError::InvalidArgument(format!(
                "prior timestamp {} not earlier than study timestamp {}",
                prior.timestamp, study.timestamp
            )));
        }
        let delta = (study.timestamp - prior.timestamp) as f64;
        if let Some(text) = prior.section("findings") {
            push_text(&mut staged, tokenizer, text, SourceId::PriorFindings, delta)?;
        }
        if let Some(text) = prior.section("impression") {
            push_text(&mut staged, tokenizer, text, SourceId::PriorImpression, delta)?;
        }
        push_images(
            &mut staged,
            model,
            &prior.images,
            SourceId::PriorImages,
            delta,
            seed ^ 0x7072696f72,
        )?;
    }

    for section in ["indication", "history", "comparison", "technique"] {
        if let Some(text) = study.section(section) {
            let source = SourceId::for_section(section).unwrap();
            push_text(&mut staged, tokenizer, text, source, 0.0)?;
        }
    }
    push_images(
        &mut staged,
        model,
        &study.images,
        SourceId::StudyImages,
        0.0,
        seed,
    )?;

    let positions = staged
        .into_iter()
        .enumerate()
        .map(|(i, (content, source, delta_seconds))| PromptPosition {
            content,
            source,
            delta_seconds,
            position_id: i,
        })
        .collect();
    Ok(PromptBundle { positions })
}
