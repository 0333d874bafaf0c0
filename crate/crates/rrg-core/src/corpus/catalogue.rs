//! The eight-finding catalogue, its planted visual motifs, and the sentence
//! grammar used to write findings/impression sections. The grammar is
//! invertible: planted findings are recoverable from the findings text.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Finding {
    Atelectasis,
    Cardiomegaly,
    NoFinding,
    Pneumonia,
    PulmonaryCongestion,
    PulmonaryEdema,
    PleuralEffusion,
    Pneumothorax,
}

/// Catalogue order; also the documented tie-break order for sampling.
pub const ALL_FINDINGS: [Finding; 8] = [
    Finding::Atelectasis,
    Finding::Cardiomegaly,
    Finding::NoFinding,
    Finding::Pneumonia,
    Finding::PulmonaryCongestion,
    Finding::PulmonaryEdema,
    Finding::PleuralEffusion,
    Finding::Pneumothorax,
];

impl Finding {
    pub fn name(self) -> &'static str {
        match self {
            Finding::Atelectasis => "atelectasis",
            Finding::Cardiomegaly => "cardiomegaly",
            Finding::NoFinding => "no-finding",
            Finding::Pneumonia => "pneumonia",
            Finding::PulmonaryCongestion => "pulmonary-congestion",
            Finding::PulmonaryEdema => "pulmonary-edema",
            Finding::PleuralEffusion => "pleural-effusion",
            Finding::Pneumothorax => "pneumothorax",
        }
    }

    pub fn from_name(name: &str) -> Option<Finding> {
        ALL_FINDINGS.iter().copied().find(|f| f.name() == name)
    }

    /// The single keyword that identifies this finding in report text.
    pub fn keyword(self) -> &'static str {
        match self {
            Finding::Atelectasis => "atelectasis",
            Finding::Cardiomegaly => "cardiomegaly",
            Finding::NoFinding => "clear",
            Finding::Pneumonia => "pneumonia",
            Finding::PulmonaryCongestion => "congestion",
            Finding::PulmonaryEdema => "edema",
            Finding::PleuralEffusion => "effusion",
            Finding::Pneumothorax => "pneumothorax",
        }
    }

    /// Findings-section sentence describing the finding.
    pub fn findings_sentence(self) -> &'static str {
        match self {
            Finding::Atelectasis => "linear opacity at the left base reflects atelectasis .",
            Finding::Cardiomegaly => "the heart is enlarged indicating cardiomegaly .",
            Finding::NoFinding => "the lungs are clear .",
            Finding::Pneumonia => "focal consolidation in the right lower zone suggests pneumonia .",
            Finding::PulmonaryCongestion => {
                "increased vascular markings indicate congestion ."
            }
            Finding::PulmonaryEdema => "diffuse interstitial opacity reflects edema .",
            Finding::PleuralEffusion => "blunting of the costophrenic angle indicates effusion .",
            Finding::Pneumothorax => "a thin apical pleural line indicates pneumothorax .",
        }
    }

    /// Impression-section sentence.
    pub fn impression_sentence(self) -> &'static str {
        match self {
            Finding::Atelectasis => "atelectasis is present .",
            Finding::Cardiomegaly => "cardiomegaly is present .",
            Finding::NoFinding => "no acute process the lungs remain clear .",
            Finding::Pneumonia => "pneumonia is present .",
            Finding::PulmonaryCongestion => "congestion is present .",
            Finding::PulmonaryEdema => "edema is present .",
            Finding::PleuralEffusion => "effusion is present .",
            Finding::Pneumothorax => "pneumothorax is present .",
        }
    }

    /// Planted visual motif: (quadrant index 0..4, intensity delta, shape).
    pub fn motif(self) -> Option<Motif> {
        match self {
            Finding::NoFinding => None,
            Finding::Atelectasis => Some(Motif::new(2, 90, Shape::Bar)),
            Finding::Cardiomegaly => Some(Motif::new(3, 110, Shape::Disk)),
            Finding::Pneumonia => Some(Motif::new(1, 100, Shape::Square)),
            Finding::PulmonaryCongestion => Some(Motif::new(0, 60, Shape::Stripes)),
            Finding::PulmonaryEdema => Some(Motif::new(1, 70, Shape::Checker)),
            Finding::PleuralEffusion => Some(Motif::new(2, 120, Shape::Wedge)),
            Finding::Pneumothorax => Some(Motif::new(0, 130, Shape::Ring)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Shape {
    Disk,
    Square,
    Bar,
    Stripes,
    Checker,
    Wedge,
    Ring,
}

#[derive(Debug, Clone, Copy)]
pub struct Motif {
    pub quadrant: usize,
    pub intensity: u8,
    pub shape: Shape,
}

impl Motif {
    fn new(quadrant: usize, intensity: u8, shape: Shape) -> Self {
        Motif {
            quadrant,
            intensity,
            shape,
        }
    }
}

/// Interval-change descriptors used when a prior is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Change {
    Unchanged,
    Improved,
    Worsened,
    New,
}

impl Change {
    pub fn word(self) -> &'static str {
        match self {
            Change::Unchanged => "unchanged",
            Change::Improved => "improved",
            Change::Worsened => "worsened",
            Change::New => "new",
        }
    }
}

/// Change sentence for a finding present in the current study.
pub fn change_sentence(finding: Finding, change: Change) -> String {
    format!(
        "the {} is {} compared to the prior study .",
        finding.keyword(),
        change.word()
    )
}

/// Recovers the planted finding set from a findings section written by the
/// grammar. The inversion matches the per-finding template sentences.
pub fn invert_findings_section(text: &str) -> Vec<Finding> {
    let mut out = Vec::new();
    for f in ALL_FINDINGS {
        if text.contains(f.findings_sentence()) {
            out.push(f);
        }
    }
    out
}
