//! Run configuration: a TOML file with whole-section defaults, overridden
//! by command-line flags. Environment variables are never consulted.

use std::path::Path;

use serde::{Deserialize, Serialize};

use rrg_core::model::ModelConfig;
use rrg_core::rewards::RewardSpec;
use rrg_core::train::{GRPOConfig, SFTConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub studies: usize,
    pub prior_probability: f64,
    pub fractions: [f64; 3],
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            studies: 2000,
            prior_probability: 0.3,
            fractions: [0.8, 0.1, 0.1],
        }
    }
}

/// Optional subset caps keeping desk-scale runs inside their time budget;
/// `None` uses the whole split.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Limits {
    pub sft_validation: Option<usize>,
    pub grpo_prompts: Option<usize>,
    pub grpo_validation: Option<usize>,
    pub eval_studies: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    /// "toy" or "paper-shapes".
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default)]
    pub corpus: CorpusConfig,
    #[serde(default = "SFTConfig::toy")]
    pub sft: SFTConfig,
    #[serde(default)]
    pub grpo: GRPOConfig,
    #[serde(default)]
    pub reward: RewardSpec,
    #[serde(default)]
    pub limits: Limits,
}

fn default_preset() -> String {
    "toy".to_string()
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            preset: default_preset(),
            corpus: CorpusConfig::default(),
            sft: SFTConfig::toy(),
            grpo: GRPOConfig::default(),
            reward: RewardSpec::default(),
            limits: Limits::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.preset != "toy" && self.preset != "paper-shapes" {
            return Err(CliError::Config(format!(
                "unknown preset '{}' (expected toy or paper-shapes)",
                self.preset
            )));
        }
        self.reward.validate()?;
        self.grpo.validate()?;
        Ok(())
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        if self.preset == "paper-shapes" {
            ModelConfig::paper_shapes(vocab_size)
        } else {
            ModelConfig::toy(vocab_size)
        }
    }
}

/// Clamps a slice to an optional cap.
pub fn capped<T>(items: &[T], limit: Option<usize>) -> &[T] {
    match limit {
        Some(n) => &items[..items.len().min(n)],
        None => items,
    }
}
