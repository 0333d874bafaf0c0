//! Plain-array incremental decoding with per-layer key/value caches. Mirrors
//! the graph-mode forward exactly; a test pins the two paths together.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::numkit::ops::normal_cdf;
use crate::numkit::Array;

use super::embed::{time_delta_feature, SourceId};
use super::net::Model;
use super::prompt::{PromptBundle, PromptContent};

const RMS_EPS: f64 = 1e-6;

fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

fn rms_norm_row(row: &[f64], gain: &[f64], out: &mut [f64]) {
    let ms = row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64;
    let ir = 1.0 / (ms + RMS_EPS).sqrt();
    for ((o, &x), &g) in out.iter_mut().zip(row).zip(gain) {
        *o = g * x * ir;
    }
}

/// row (1 x r) times matrix (r x c).
fn vecmat(row: &[f64], m: &Array) -> Vec<f64> {
    let (r, c) = (m.rows(), m.cols());
    debug_assert_eq!(row.len(), r);
    let mut out = vec![0.0; c];
    for (i, &x) in row.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let mrow = &m.data()[i * c..(i + 1) * c];
        for (o, &w) in out.iter_mut().zip(mrow) {
            *o += x * w;
        }
    }
    out
}

/// In-place rotary transform of one row of head width `dh`, repeated across
/// heads.
fn rotary_row(row: &mut [f64], dh: usize, pos: usize, base: f64) {
    let p = pos as f64;
    for head in row.chunks_mut(dh) {
        for j in 0..dh / 2 {
            let theta = base.powf(-2.0 * j as f64 / dh as f64);
            let (s, c) = (p * theta).sin_cos();
            let (x0, x1) = (head[2 * j], head[2 * j + 1]);
            head[2 * j] = c * x0 - s * x1;
            head[2 * j + 1] = s * x0 + c * x1;
        }
    }
}

fn softmax_inplace(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        z += *x;
    }
    for x in v.iter_mut() {
        *x /= z;
    }
}

struct PlainBlock {
    wq: Array,
    wk: Array,
    wv: Array,
    wo: Array,
    norm1: Vec<f64>,
    norm2: Vec<f64>,
    ff1: Array,
    ff2: Array,
}

impl PlainBlock {
    /// Attention output for one query row against `keys`/`vals` (n rows of
    /// width d), then the feed-forward, both with residuals.
    fn attend_row(
        &self,
        x: &[f64],
        q_rot: &[f64],
        keys: &[f64],
        vals: &[f64],
        n: usize,
        heads: usize,
    ) -> Vec<f64> {
        let d = x.len();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut attn = vec![0.0; d];
        let mut scores = vec![0.0; n];
        for h in 0..heads {
            let qh = &q_rot[h * dh..(h + 1) * dh];
            for (j, s) in scores.iter_mut().enumerate() {
                let kh = &keys[j * d + h * dh..j * d + (h + 1) * dh];
                *s = qh.iter().zip(kh).map(|(a, b)| a * b).sum::<f64>() * scale;
            }
            softmax_inplace(&mut scores);
            for (j, &w) in scores.iter().enumerate() {
                let vh = &vals[j * d + h * dh..j * d + (h + 1) * dh];
                for (a, &b) in attn[h * dh..(h + 1) * dh].iter_mut().zip(vh) {
                    *a += w * b;
                }
            }
        }
        let proj = vecmat(&attn, &self.wo);
        let mut x1: Vec<f64> = x.iter().zip(&proj).map(|(a, b)| a + b).collect();

        let mut xn = vec![0.0; d];
        rms_norm_row(&x1, &self.norm2, &mut xn);
        let hidden: Vec<f64> = vecmat(&xn, &self.ff1).into_iter().map(gelu).collect();
        let ff = vecmat(&hidden, &self.ff2);
        for (a, b) in x1.iter_mut().zip(&ff) {
            *a += b;
        }
        x1
    }
}

pub struct InferSession {
    d_model: usize,
    heads: usize,
    rotary_base: f64,
    sep_id: usize,
    layers: Vec<PlainBlock>,
    tok_embed: Array,
    src_embed: Array,
    td_w1: Array,
    td_w2: Array,
    final_norm: Vec<f64>,
    lm_head: Array,
    /// Per layer: rotated keys and raw values, one flat row per position.
    k_cache: Vec<Vec<f64>>,
    v_cache: Vec<Vec<f64>>,
    n_rows: usize,
    next_pos: usize,
    sep_seen: bool,
    td_memo: HashMap<u64, Vec<f64>>,
    last_logits: Vec<f64>,
}

impl InferSession {
    /// Runs the prompt through the network, filling the caches and producing
    /// first-token logits.
    pub fn start(model: &Model, bundle: &PromptBundle) -> Result<InferSession> {
        let l = bundle.len();
        if l == 0 {
            return Err(CoreError::InvalidArgument("empty prompt".into()));
        }
        let cfg = &model.config;
        let mut session = InferSession {
            d_model: cfg.d_model,
            heads: cfg.heads,
            rotary_base: cfg.rotary_base,
            sep_id: cfg.sep_id,
            layers: model
                .decoder_layers
                .iter()
                .map(|b| PlainBlock {
                    wq: b.wq.value(),
                    wk: b.wk.value(),
                    wv: b.wv.value(),
                    wo: b.wo.value(),
                    norm1: b.norm1.value().data().to_vec(),
                    norm2: b.norm2.value().data().to_vec(),
                    ff1: b.ff1.value(),
                    ff2: b.ff2.value(),
                })
                .collect(),
            tok_embed: model.tok_embed.value(),
            src_embed: model.src_embed.value(),
            td_w1: model.td_w1.value(),
            td_w2: model.td_w2.value(),
            final_norm: model.final_norm.value().data().to_vec(),
            lm_head: model.lm_head.value(),
            k_cache: vec![Vec::new(); cfg.layers],
            v_cache: vec![Vec::new(); cfg.layers],
            n_rows: 0,
            next_pos: l,
            sep_seen: false,
            td_memo: HashMap::new(),
            last_logits: Vec::new(),
        };

        let d = session.d_model;
        let dh = d / session.heads;
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(l);
        let mut pos_ids = Vec::with_capacity(l);
        for p in &bundle.positions {
            let content: Vec<f64> = match &p.content {
                PromptContent::Token(id) => session.tok_embed.row(*id).to_vec(),
                PromptContent::Image(v) => v.value().data().to_vec(),
            };
            rows.push(session.embed_row(&content, p.source, p.delta_seconds)?);
            pos_ids.push(p.position_id);
        }

        // full bidirectional pass over the prompt block
        for li in 0..session.layers.len() {
            let layer = &session.layers[li];
            let mut keys = vec![0.0; l * d];
            let mut vals = vec![0.0; l * d];
            let mut qs = vec![0.0; l * d];
            let mut xn = vec![0.0; d];
            for (r, row) in rows.iter().enumerate() {
                rms_norm_row(row, &layer.norm1, &mut xn);
                let mut q = vecmat(&xn, &layer.wq);
                let mut k = vecmat(&xn, &layer.wk);
                let v = vecmat(&xn, &layer.wv);
                rotary_row(&mut q, dh, pos_ids[r], session.rotary_base);
                rotary_row(&mut k, dh, pos_ids[r], session.rotary_base);
                qs[r * d..(r + 1) * d].copy_from_slice(&q);
                keys[r * d..(r + 1) * d].copy_from_slice(&k);
                vals[r * d..(r + 1) * d].copy_from_slice(&v);
            }
            let layer = &session.layers[li];
            let new_rows: Vec<Vec<f64>> = rows
                .iter()
                .enumerate()
                .map(|(r, row)| {
                    layer.attend_row(row, &qs[r * d..(r + 1) * d], &keys, &vals, l, session.heads)
                })
                .collect();
            session.k_cache[li] = keys;
            session.v_cache[li] = vals;
            rows = new_rows;
        }
        session.n_rows = l;

        let anchor = bundle
            .positions
            .iter()
            .position(|p| p.position_id == l - 1)
            .ok_or_else(|| CoreError::InvalidArgument("prompt position ids not 0..L-1".into()))?;
        session.finish_logits(&rows[anchor]);
        Ok(session)
    }

    fn embed_row(&mut self, content: &[f64], source: SourceId, delta: f64) -> Result<Vec<f64>> {
        let td = match self.td_memo.entry(delta.to_bits()) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => {
                let dprime = time_delta_feature(delta)?;
                let hidden: Vec<f64> = self
                    .td_w1
                    .data()
                    .iter()
                    .map(|&w| gelu(dprime * w))
                    .collect();
                e.insert(vecmat(&hidden, &self.td_w2))
            }
        };
        let src = self.src_embed.row(source.index());
        Ok(content
            .iter()
            .zip(src)
            .zip(td.iter())
            .map(|((&c, &s), &t)| c + s + t)
            .collect())
    }

    fn finish_logits(&mut self, hidden: &[f64]) {
        let mut xn = vec![0.0; self.d_model];
        rms_norm_row(hidden, &self.final_norm, &mut xn);
        self.last_logits = vecmat(&xn, &self.lm_head);
    }

    /// Appends one generated token and returns logits for the next one.
    pub fn push(&mut self, token: usize) -> Result<&[f64]> {
        let source = if self.sep_seen {
            SourceId::GeneratedImpression
        } else {
            SourceId::GeneratedFindings
        };
        if token == self.sep_id {
            self.sep_seen = true;
        }
        if token >= self.tok_embed.rows() {
            return Err(CoreError::InvalidArgument(format!(
                "token {token} outside vocabulary"
            )));
        }
        let content = self.tok_embed.row(token).to_vec();
        let mut row = self.embed_row(&content, source, 0.0)?;
        let d = self.d_model;
        let dh = d / self.heads;
        let pos = self.next_pos;
        self.next_pos += 1;

        let mut xn = vec![0.0; d];
        for li in 0..self.layers.len() {
            rms_norm_row(&row, &self.layers[li].norm1, &mut xn);
            let mut q = vecmat(&xn, &self.layers[li].wq);
            let mut k = vecmat(&xn, &self.layers[li].wk);
            let v = vecmat(&xn, &self.layers[li].wv);
            rotary_row(&mut q, dh, pos, self.rotary_base);
            rotary_row(&mut k, dh, pos, self.rotary_base);
            self.k_cache[li].extend_from_slice(&k);
            self.v_cache[li].extend_from_slice(&v);
            row = self.layers[li].attend_row(
                &row,
                &q,
                &self.k_cache[li],
                &self.v_cache[li],
                self.n_rows + 1,
                self.heads,
            );
        }
        self.n_rows += 1;
        self.finish_logits(&row);
        Ok(&self.last_logits)
    }

    pub fn logits(&self) -> &[f64] {
        &self.last_logits
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    Greedy,
    Sample { temperature: f64 },
}

/// Lowest token id wins ties.
fn pick_greedy(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

fn pick_sample(logits: &[f64], temperature: f64, rng: &mut ChaCha8Rng) -> usize {
    let mut probs: Vec<f64> = logits.iter().map(|&v| v / temperature).collect();
    softmax_inplace(&mut probs);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Autoregressive decoding: BOS is fed first, then tokens are emitted until
/// EOS or `max_tokens`. The returned sequence excludes the leading BOS.
pub fn generate(
    model: &Model,
    bundle: &PromptBundle,
    mode: DecodeMode,
    max_tokens: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if max_tokens == 0 {
        return Err(CoreError::InvalidArgument(
            "max_tokens must be at least 1".into(),
        ));
    }
    let mut session = InferSession::start(model, bundle)?;
    session.push(model.config.bos_id)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    loop {
        let next = match mode {
            DecodeMode::Greedy => pick_greedy(session.logits()),
            DecodeMode::Sample { temperature } => {
                pick_sample(session.logits(), temperature, &mut rng)
            }
        };
        out.push(next);
        if next == model.config.eos_id || out.len() >= max_tokens {
            return Ok(out);
        }
        session.push(next)?;
    }
}
