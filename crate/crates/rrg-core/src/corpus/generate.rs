//! Synthetic study generation. Each study carries 1-3 normalised images with
//! planted motifs, grammar-written report sections, and optionally a prior
//! study with interval-change sentences.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::catalogue::{change_sentence, Change, Finding, ALL_FINDINGS};
use super::image::{normalise_image, render_image, GrayImage};

pub const IMAGE_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Frontal,
    Lateral,
}

#[derive(Debug, Clone)]
pub struct StudyImage {
    pub view: View,
    pub pixels: GrayImage,
}

/// One imaging examination with its report and optional prior.
#[derive(Debug, Clone)]
pub struct StudyRecord {
    pub study_id: String,
    pub patient_id: String,
    /// Acquisition time, seconds since epoch.
    pub timestamp: i64,
    pub sections: BTreeMap<String, String>,
    pub images: Vec<StudyImage>,
    pub findings: Vec<Finding>,
    pub prior: Option<Box<StudyRecord>>,
}

impl StudyRecord {
    pub fn section(&self, name: &str) -> Option<&str> {
        self.sections.get(name).map(String::as_str)
    }

    pub fn has_findings_and_impression(&self) -> bool {
        self.sections.contains_key("findings") && self.sections.contains_key("impression")
    }
}

const HISTORY_LINES: [&str; 4] = [
    "patient with cough and fever .",
    "patient with shortness of breath .",
    "patient with chest pain .",
    "patient admitted for evaluation .",
];

fn pick_findings(rng: &mut ChaCha8Rng) -> Vec<Finding> {
    if rng.gen::<f64>() < 0.25 {
        return vec![Finding::NoFinding];
    }
    let positives: Vec<Finding> = ALL_FINDINGS
        .iter()
        .copied()
        .filter(|f| *f != Finding::NoFinding)
        .collect();
    let count = if rng.gen::<f64>() < 0.6 { 1 } else { 2 };
    let mut chosen = Vec::new();
    while chosen.len() < count {
        let f = positives[rng.gen_range(0..positives.len())];
        if !chosen.contains(&f) {
            chosen.push(f);
        }
    }
    chosen.sort();
    chosen
}

fn indication_line(findings: &[Finding]) -> String {
    let keywords: Vec<&str> = findings.iter().map(|f| f.keyword()).collect();
    format!("evaluate for {} .", keywords.join(" and "))
}

fn findings_section(
    findings: &[Finding],
    prior_findings: Option<&[Finding]>,
    rng: &mut ChaCha8Rng,
) -> String {
    let mut sentences: Vec<String> = findings
        .iter()
        .map(|f| f.findings_sentence().to_string())
        .collect();
    if let Some(prev) = prior_findings {
        for &f in findings {
            if f == Finding::NoFinding {
                continue;
            }
            let change = if prev.contains(&f) {
                match rng.gen_range(0..3) {
                    0 => Change::Unchanged,
                    1 => Change::Improved,
                    _ => Change::Worsened,
                }
            } else {
                Change::New
            };
            sentences.push(change_sentence(f, change));
        }
    }
    sentences.join(" ")
}

fn impression_section(findings: &[Finding]) -> String {
    findings
        .iter()
        .map(|f| f.impression_sentence().to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn render_study_images(
    findings: &[Finding],
    n_images: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<StudyImage> {
    let motifs: Vec<_> = findings.iter().filter_map(|f| f.motif()).collect();
    let mut images = Vec::new();
    for i in 0..n_images {
        // second image (if any) is the lateral view
        let view = if i == 1 { View::Lateral } else { View::Frontal };
        let noise: Vec<f64> = (0..IMAGE_SIZE * IMAGE_SIZE)
            .map(|_| rng.gen::<f64>())
            .collect();
        let grid = render_image(IMAGE_SIZE, &motifs, &noise, view == View::Lateral);
        let pixels = normalise_image(&grid).expect("rendered images have dynamic range");
        images.push(StudyImage { view, pixels });
    }
    images
}

fn make_sections(
    findings: &[Finding],
    prior: Option<&StudyRecord>,
    n_images: usize,
    rng: &mut ChaCha8Rng,
) -> BTreeMap<String, String> {
    let mut sections = BTreeMap::new();
    sections.insert("indication".to_string(), indication_line(findings));
    if rng.gen::<f64>() < 0.8 {
        sections.insert(
            "history".to_string(),
            HISTORY_LINES[rng.gen_range(0..HISTORY_LINES.len())].to_string(),
        );
    }
    let comparison = if prior.is_some() {
        "comparison is made to a prior study ."
    } else {
        "no prior study available ."
    };
    sections.insert("comparison".to_string(), comparison.to_string());
    let technique = if n_images >= 2 {
        "frontal and lateral views of the chest ."
    } else {
        "single frontal view of the chest ."
    };
    sections.insert("technique".to_string(), technique.to_string());
    sections.insert(
        "findings".to_string(),
        findings_section(findings, prior.map(|p| p.findings.as_slice()), rng),
    );
    sections.insert("impression".to_string(), impression_section(findings));
    sections
}

/// Generates a deterministic corpus. With `prior_probability`, a study gets
/// an earlier study of the same patient inlined as its prior.
pub fn generate_corpus(n_studies: usize, prior_probability: f64, seed: u64) -> Vec<StudyRecord> {
    assert!(n_studies >= 1, "n_studies must be at least 1");
    assert!(
        (0.0..=1.0).contains(&prior_probability),
        "prior_probability must lie in [0,1]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<StudyRecord> = Vec::with_capacity(n_studies);
    for idx in 0..n_studies {
        // every seventh study revisits the previous patient so splits and
        // sampling exercise the patient-uniqueness rules
        let patient_id = if idx > 0 && idx % 7 == 0 {
            out[idx - 1].patient_id.clone()
        } else {
            format!("p{idx:05}")
        };
        let timestamp = 1_600_000_000 + idx as i64 * 86_400 + rng.gen_range(0..3600) as i64;
        let findings = pick_findings(&mut rng);

        let prior = if rng.gen::<f64>() < prior_probability {
            let prior_findings = pick_findings(&mut rng);
            let prior_ts = timestamp - rng.gen_range(1..=30) as i64 * 86_400;
            let prior_sections = make_sections(&prior_findings, None, 1, &mut rng);
            let prior_images = render_study_images(&prior_findings, 1, &mut rng);
            Some(Box::new(StudyRecord {
                study_id: format!("s{idx:05}-prior"),
                patient_id: patient_id.clone(),
                timestamp: prior_ts,
                sections: prior_sections,
                images: prior_images,
                findings: prior_findings,
                prior: None,
            }))
        } else {
            None
        };

        let n_images = 1 + rng.gen_range(0..3);
        let sections = make_sections(&findings, prior.as_deref(), n_images, &mut rng);
        let images = render_study_images(&findings, n_images, &mut rng);
        out.push(StudyRecord {
            study_id: format!("s{idx:05}"),
            patient_id,
            timestamp,
            sections,
            images,
            findings,
            prior,
        });
    }
    out
}
