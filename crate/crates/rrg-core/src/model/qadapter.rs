//! Latent-query adapter compressing per-patch features to a fixed number of
//! decoder-ready rows.

use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::numkit::{ops, Parameter, Var};

use super::blocks::Block;
use super::config::ModelConfig;
use super::init::init_matrix;

pub struct QAdapter {
    pub queries: Parameter,
    layers: Vec<Block>,
    pub out_proj: Parameter,
    heads: usize,
    rotary_base: f64,
    d_v: usize,
    n_q: usize,
}

impl QAdapter {
    pub fn new(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let heads = if config.d_v % config.heads == 0 && (config.d_v / config.heads) % 2 == 0 {
            config.heads
        } else {
            // fall back to heads that always tile d_v
            1
        };
        QAdapter {
            queries: Parameter::new(
                "adapter.queries",
                init_matrix(rng, config.n_q, config.d_v),
            ),
            layers: (0..config.adapter_layers)
                .map(|i| {
                    Block::new(
                        &format!("adapter.layer{i}"),
                        config.d_v,
                        config.adapter_ff,
                        rng,
                    )
                })
                .collect(),
            out_proj: Parameter::new(
                "adapter.out_proj",
                init_matrix(rng, config.d_v, config.d_model),
            ),
            heads,
            rotary_base: config.rotary_base,
            d_v: config.d_v,
            n_q: config.n_q,
        }
    }

    pub fn parameters(&self) -> Vec<Parameter> {
        let mut ps = vec![self.queries.clone()];
        for l in &self.layers {
            ps.extend(l.parameters());
        }
        ps.push(self.out_proj.clone());
        ps
    }

    /// [queries; V] through the encoder layers; the query rows are retained
    /// and projected to d_model. Output is n_q x d_model for any patch count.
    pub fn forward(&self, v: &Var) -> Result<Var> {
        if v.value().cols() != self.d_v {
            return Err(CoreError::Shape(format!(
                "adapter expected width {}, got {}",
                self.d_v,
                v.value().cols()
            )));
        }
        let n_total = self.n_q + v.value().rows();
        let mut x = ops::concat_rows(&[self.queries.var.clone(), v.clone()])?;
        let pos_ids: Vec<usize> = (0..n_total).collect();
        let allowed = vec![vec![true; n_total]; n_total];
        for layer in &self.layers {
            x = layer.forward(&x, self.heads, &pos_ids, self.rotary_base, &allowed)?;
        }
        let kept = ops::slice_rows(&x, 0, self.n_q)?;
        ops::matmul(&kept, &self.out_proj.var)
    }
}
