//! The composite reward: pluggable named components with fixed weights.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

use super::metrics::{arn, bleu4, rouge_l};

/// Findings/impression text pair, the unit rewards operate on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportSections {
    pub findings: String,
    pub impression: String,
}

impl ReportSections {
    pub fn new(findings: impl Into<String>, impression: impl Into<String>) -> Self {
        ReportSections {
            findings: findings.into(),
            impression: impression.into(),
        }
    }

    pub fn joined(&self) -> String {
        format!("{} {}", self.findings, self.impression)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardSpec {
    /// (component name, weight) in evaluation order.
    pub components: Vec<(String, f64)>,
}

impl Default for RewardSpec {
    fn default() -> Self {
        RewardSpec {
            components: vec![
                ("bleu4".into(), 0.3),
                ("rougeL".into(), 0.3),
                ("section_f1".into(), 0.3),
                ("arn".into(), 0.1),
            ],
        }
    }
}

impl RewardSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, (name, w)) in self.components.iter().enumerate() {
            if *w < 0.0 {
                return Err(CoreError::InvalidArgument(format!(
                    "negative weight for component '{name}'"
                )));
            }
            if self.components[i + 1..].iter().any(|(n, _)| n == name) {
                return Err(CoreError::InvalidArgument(format!(
                    "duplicate component '{name}'"
                )));
            }
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.components.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|(_, w)| *w).collect()
    }
}

fn component_score(name: &str, generated: &ReportSections, reference: &ReportSections) -> Result<f64> {
    Ok(match name {
        "bleu4" => bleu4(&generated.joined(), &reference.joined()),
        "rougeL" => rouge_l(&generated.joined(), &reference.joined()),
        "section_f1" => {
            (rouge_l(&generated.findings, &reference.findings)
                + rouge_l(&generated.impression, &reference.impression))
                / 2.0
        }
        "arn" => arn(&generated.joined()),
        other => {
            return Err(CoreError::InvalidArgument(format!(
                "unknown reward component '{other}'"
            )))
        }
    })
}

/// Unweighted component vector in spec order. Invalid completions never get
/// here; callers hand them `zero_reward`.
pub fn composite_reward(
    generated: &ReportSections,
    reference: &ReportSections,
    spec: &RewardSpec,
) -> Result<Vec<f64>> {
    spec.validate()?;
    spec.components
        .iter()
        .map(|(name, _)| component_score(name, generated, reference))
        .collect()
}

pub fn zero_reward(spec: &RewardSpec) -> Vec<f64> {
    vec![0.0; spec.components.len()]
}

/// Weighted scalar score, used for validation monitoring.
pub fn weighted_score(rewards: &[f64], spec: &RewardSpec) -> f64 {
    rewards
        .iter()
        .zip(spec.weights())
        .map(|(r, w)| r * w)
        .sum()
}
