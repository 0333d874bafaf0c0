//! The run manifest: per-stage completion records with content hashes of
//! every artifact, enabling resumption and reproducibility checks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageRecord {
    pub completed: bool,
    /// Relative artifact path -> sha256 of its content.
    pub outputs: BTreeMap<String, String>,
    /// Free-form stage facts (seeds, scores, chosen checkpoints).
    pub info: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub config_sha256: String,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn load_or_new(run_dir: &Path, seed: u64) -> Result<RunManifest> {
        let path = run_dir.join(MANIFEST_FILE);
        if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            let manifest: RunManifest = serde_json::from_str(&text)
                .map_err(|e| CliError::Invalid(format!("corrupt manifest: {e}")))?;
            if manifest.seed != seed {
                return Err(CliError::Invalid(format!(
                    "run directory was created with seed {}, not {seed}",
                    manifest.seed
                )));
            }
            Ok(manifest)
        } else {
            Ok(RunManifest {
                seed,
                ..Default::default()
            })
        }
    }

    pub fn save(&self, run_dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Invalid(e.to_string()))?;
        std::fs::write(run_dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn stage_done(&self, name: &str) -> bool {
        self.stages.get(name).map(|s| s.completed).unwrap_or(false)
    }

    /// Marks a stage complete, hashing each artifact path relative to the
    /// run directory.
    pub fn record_stage(
        &mut self,
        run_dir: &Path,
        name: &str,
        outputs: &[&Path],
        info: BTreeMap<String, String>,
    ) -> Result<()> {
        let mut hashed = BTreeMap::new();
        for path in outputs {
            let rel = path
                .strip_prefix(run_dir)
                .map(|p| p.to_string_lossy().into_owned())
                .unwrap_or_else(|_| path.to_string_lossy().into_owned());
            hashed.insert(rel, sha256_file(path)?);
        }
        self.stages.insert(
            name.to_string(),
            StageRecord {
                completed: true,
                outputs: hashed,
                info,
            },
        );
        self.save(run_dir)
    }

    /// Content hash of the whole manifest, used by determinism checks.
    pub fn content_hash(&self) -> Result<String> {
        let text = serde_json::to_string(self)
            .map_err(|e| CliError::Invalid(e.to_string()))?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }
}
