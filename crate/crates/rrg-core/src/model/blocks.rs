//! Transformer block shared by the adapter encoder and the decoder:
//! pre-norm multi-head self-attention with rotary positions, then a
//! pre-norm GELU feed-forward, both with residual connections.

use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::numkit::{ops, Parameter, Var};

use super::init::{init_matrix, ones};

pub(crate) struct Block {
    pub wq: Parameter,
    pub wk: Parameter,
    pub wv: Parameter,
    pub wo: Parameter,
    pub norm1: Parameter,
    pub norm2: Parameter,
    pub ff1: Parameter,
    pub ff2: Parameter,
}

impl Block {
    pub fn new(prefix: &str, width: usize, ff: usize, rng: &mut ChaCha8Rng) -> Self {
        let mat = |rng: &mut ChaCha8Rng, name: &str, r: usize, c: usize| {
            Parameter::new(format!("{prefix}.{name}"), init_matrix(rng, r, c))
        };
        Block {
            wq: mat(rng, "wq", width, width),
            wk: mat(rng, "wk", width, width),
            wv: mat(rng, "wv", width, width),
            wo: mat(rng, "wo", width, width),
            norm1: Parameter::new(format!("{prefix}.norm1"), ones(width)),
            norm2: Parameter::new(format!("{prefix}.norm2"), ones(width)),
            ff1: mat(rng, "ff1", width, ff),
            ff2: mat(rng, "ff2", ff, width),
        }
    }

    pub fn parameters(&self) -> Vec<Parameter> {
        vec![
            self.wq.clone(),
            self.wk.clone(),
            self.wv.clone(),
            self.wo.clone(),
            self.norm1.clone(),
            self.norm2.clone(),
            self.ff1.clone(),
            self.ff2.clone(),
        ]
    }

    pub fn forward(
        &self,
        x: &Var,
        heads: usize,
        pos_ids: &[usize],
        rotary_base: f64,
        allowed: &[Vec<bool>],
    ) -> Result<Var> {
        let width = x.value().cols();
        let dh = width / heads;

        let xn = ops::rms_norm(x, &self.norm1.var)?;
        let q = ops::matmul(&xn, &self.wq.var)?;
        let k = ops::matmul(&xn, &self.wk.var)?;
        let v = ops::matmul(&xn, &self.wv.var)?;
        let mut head_outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let (lo, hi) = (h * dh, (h + 1) * dh);
            let qh = ops::rotary_apply(&ops::slice_cols(&q, lo, hi)?, pos_ids, rotary_base)?;
            let kh = ops::rotary_apply(&ops::slice_cols(&k, lo, hi)?, pos_ids, rotary_base)?;
            let vh = ops::slice_cols(&v, lo, hi)?;
            head_outs.push(ops::masked_attention(&qh, &kh, &vh, allowed)?);
        }
        let attn = ops::matmul(&ops::concat_cols(&head_outs)?, &self.wo.var)?;
        let x = ops::add(x, &attn)?;

        let xn = ops::rms_norm(&x, &self.norm2.var)?;
        let h = ops::gelu(&ops::matmul(&xn, &self.ff1.var)?)?;
        let ff = ops::matmul(&h, &self.ff2.var)?;
        ops::add(&x, &ff)
    }
}
