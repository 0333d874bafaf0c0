//! Dataset persistence: one JSON record per line, P5 graymap image files,
//! and a JSON manifest per split.

use std::collections::BTreeMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::catalogue::Finding;
use super::generate::{StudyImage, StudyRecord, View};
use super::image::{read_pgm, write_pgm};
use crate::error::{CoreError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredImage {
    pub path: String,
    pub view: View,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredStudy {
    pub study_id: String,
    pub patient_id: String,
    pub timestamp: i64,
    pub sections: BTreeMap<String, String>,
    pub images: Vec<StoredImage>,
    pub findings: Vec<String>,
    pub prior: Option<Box<StoredStudy>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub split: String,
    pub studies: usize,
    pub finding_counts: BTreeMap<String, usize>,
    pub seed: u64,
    pub format_version: u32,
}

fn store_study(study: &StudyRecord, root: &Path) -> Result<StoredStudy> {
    let mut images = Vec::with_capacity(study.images.len());
    for (i, img) in study.images.iter().enumerate() {
        let rel = format!("images/{}_{}.pgm", study.study_id, i);
        write_pgm(&img.pixels, &root.join(&rel))?;
        images.push(StoredImage {
            path: rel,
            view: img.view,
        });
    }
    let prior = match &study.prior {
        Some(p) => Some(Box::new(store_study(p, root)?)),
        None => None,
    };
    Ok(StoredStudy {
        study_id: study.study_id.clone(),
        patient_id: study.patient_id.clone(),
        timestamp: study.timestamp,
        sections: study.sections.clone(),
        images,
        findings: study.findings.iter().map(|f| f.name().to_string()).collect(),
        prior,
    })
}

fn load_study(stored: &StoredStudy, root: &Path) -> Result<StudyRecord> {
    let mut images = Vec::with_capacity(stored.images.len());
    for img in &stored.images {
        images.push(StudyImage {
            view: img.view,
            pixels: read_pgm(&root.join(&img.path))?,
        });
    }
    let mut findings = Vec::with_capacity(stored.findings.len());
    for name in &stored.findings {
        findings.push(Finding::from_name(name).ok_or_else(|| {
            CoreError::Serialization(format!("unknown finding name '{name}'"))
        })?);
    }
    let prior = match &stored.prior {
        Some(p) => Some(Box::new(load_study(p, root)?)),
        None => None,
    };
    Ok(StudyRecord {
        study_id: stored.study_id.clone(),
        patient_id: stored.patient_id.clone(),
        timestamp: stored.timestamp,
        sections: stored.sections.clone(),
        images,
        findings,
        prior,
    })
}

/// Writes `<root>/<split>.jsonl`, the referenced PGM images under
/// `<root>/images/`, and `<root>/<split>.manifest.json`.
pub fn write_split(
    records: &[StudyRecord],
    root: &Path,
    split: &str,
    seed: u64,
) -> Result<DatasetManifest> {
    std::fs::create_dir_all(root.join("images"))?;
    let file = std::fs::File::create(root.join(format!("{split}.jsonl")))?;
    let mut w = BufWriter::new(file);
    let mut finding_counts: BTreeMap<String, usize> = BTreeMap::new();
    for study in records {
        let stored = store_study(study, root)?;
        serde_json::to_writer(&mut w, &stored)
            .map_err(|e| CoreError::Serialization(e.to_string()))?;
        w.write_all(b"\n")?;
        for f in &study.findings {
            *finding_counts.entry(f.name().to_string()).or_insert(0) += 1;
        }
    }
    w.flush()?;
    let manifest = DatasetManifest {
        split: split.to_string(),
        studies: records.len(),
        finding_counts,
        seed,
        format_version: FORMAT_VERSION,
    };
    let mf = std::fs::File::create(root.join(format!("{split}.manifest.json")))?;
    serde_json::to_writer_pretty(mf, &manifest)
        .map_err(|e| CoreError::Serialization(e.to_string()))?;
    Ok(manifest)
}

pub fn read_split(root: &Path, split: &str) -> Result<Vec<StudyRecord>> {
    let file = std::fs::File::open(root.join(format!("{split}.jsonl")))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let stored: StoredStudy = serde_json::from_str(&line)
            .map_err(|e| CoreError::Serialization(e.to_string()))?;
        out.push(load_study(&stored, root)?);
    }
    Ok(out)
}

pub fn read_manifest(root: &Path, split: &str) -> Result<DatasetManifest> {
    let file = std::fs::File::open(root.join(format!("{split}.manifest.json")))?;
    serde_json::from_reader(file).map_err(|e| CoreError::Serialization(e.to_string()))
}
