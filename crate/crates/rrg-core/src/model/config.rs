//! Model hyperparameters and the two built-in presets.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const PAD_ID: usize = 0;
pub const BOS_ID: usize = 1;
pub const SEP_ID: usize = 2;
pub const EOS_ID: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub layers: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub vocab_size: usize,
    pub pad_id: usize,
    pub bos_id: usize,
    pub sep_id: usize,
    pub eos_id: usize,
    /// Patch-encoder output width.
    pub d_v: usize,
    /// Patches per image.
    pub n_p: usize,
    /// Learned query count of the adapter.
    pub n_q: usize,
    pub adapter_layers: usize,
    pub adapter_ff: usize,
    pub td_inner: usize,
    pub rotary_base: f64,
    pub max_generated: usize,
    /// Images per timepoint fed to the prompt.
    pub image_limit: usize,
    pub init_seed: u64,
}

impl ModelConfig {
    /// Small CPU-trainable preset.
    pub fn toy(vocab_size: usize) -> Self {
        ModelConfig {
            d_model: 32,
            layers: 2,
            heads: 4,
            d_ff: 64,
            vocab_size,
            pad_id: PAD_ID,
            bos_id: BOS_ID,
            sep_id: SEP_ID,
            eos_id: EOS_ID,
            d_v: 32,
            n_p: 16,
            n_q: 4,
            adapter_layers: 1,
            adapter_ff: 64,
            td_inner: 8,
            rotary_base: 10_000.0,
            max_generated: 320,
            image_limit: 5,
            init_seed: 0,
        }
    }

    /// Published component shapes; far too large to train here, used for
    /// shape contracts.
    pub fn paper_shapes(vocab_size: usize) -> Self {
        ModelConfig {
            d_model: 3072,
            layers: 2,
            heads: 16,
            d_ff: 8192,
            vocab_size,
            pad_id: PAD_ID,
            bos_id: BOS_ID,
            sep_id: SEP_ID,
            eos_id: EOS_ID,
            d_v: 768,
            n_p: 1369,
            n_q: 128,
            adapter_layers: 2,
            adapter_ff: 1536,
            td_inner: 2048,
            rotary_base: 10_000.0,
            max_generated: 320,
            image_limit: 5,
            init_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model % self.heads != 0 {
            return Err(CoreError::InvalidArgument(format!(
                "d_model {} not divisible by heads {}",
                self.d_model, self.heads
            )));
        }
        if (self.d_model / self.heads) % 2 != 0 {
            return Err(CoreError::InvalidArgument(
                "head dimension must be even for rotary positions".into(),
            ));
        }
        let specials = [self.pad_id, self.bos_id, self.sep_id, self.eos_id];
        for (i, a) in specials.iter().enumerate() {
            if *a >= self.vocab_size {
                return Err(CoreError::InvalidArgument(
                    "special token id outside vocabulary".into(),
                ));
            }
            for b in &specials[i + 1..] {
                if a == b {
                    return Err(CoreError::InvalidArgument(
                        "special token ids must be distinct".into(),
                    ));
                }
            }
        }
        if self.n_q == 0 {
            return Err(CoreError::InvalidArgument("n_q must be at least 1".into()));
        }
        Ok(())
    }
}
