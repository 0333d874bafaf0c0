//! Shared on-disk artifacts: model bundles and generated-report files.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use rrg_core::corpus::StudyRecord;
use rrg_core::model::{Model, ModelConfig, Tokenizer};
use rrg_core::train::load_model_into;

use crate::error::{CliError, Result};

pub const MODEL_CONFIG_FILE: &str = "model.json";
pub const VOCAB_FILE: &str = "vocab.tsv";

pub fn save_model_config(config: &ModelConfig, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(config)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_model_config(path: &Path) -> Result<ModelConfig> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

/// Rebuilds a trained model from its config, vocabulary, and snapshot.
pub fn load_bundle(
    model_config: &Path,
    vocab: &Path,
    snapshot: &Path,
    image_size: usize,
) -> Result<(ModelConfig, Tokenizer, Model)> {
    let config = load_model_config(model_config)?;
    let tokenizer = Tokenizer::load(vocab)?;
    if tokenizer.vocab_size() != config.vocab_size {
        return Err(CliError::Invalid(format!(
            "vocabulary has {} entries but the model expects {}",
            tokenizer.vocab_size(),
            config.vocab_size
        )));
    }
    let model = Model::new(&config, image_size)?;
    load_model_into(&model, snapshot)?;
    Ok((config, tokenizer, model))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratedReport {
    pub study_id: String,
    pub findings: String,
    pub impression: String,
}

pub fn write_reports(reports: &[GeneratedReport], path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    for report in reports {
        let line = serde_json::to_string(report)
            .map_err(|e| CliError::Invalid(e.to_string()))?;
        writeln!(file, "{line}")?;
    }
    Ok(())
}

pub fn read_reports(path: &Path) -> Result<BTreeMap<String, GeneratedReport>> {
    let file = std::fs::File::open(path)?;
    let mut out = BTreeMap::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let report: GeneratedReport = serde_json::from_str(&line)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        out.insert(report.study_id.clone(), report);
    }
    Ok(out)
}

/// Studies carrying both reference sections, in stable id order.
pub fn reportable(studies: &[StudyRecord]) -> Vec<&StudyRecord> {
    studies
        .iter()
        .filter(|s| s.has_findings_and_impression())
        .collect()
}
