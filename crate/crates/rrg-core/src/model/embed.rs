//! Source identities and the time-delta transform/embedding.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::numkit::{ops, Var};

pub const N_SOURCES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceId {
    Indication,
    History,
    Comparison,
    Technique,
    GeneratedFindings,
    GeneratedImpression,
    PriorFindings,
    PriorImpression,
    StudyImages,
    PriorImages,
}

pub const ALL_SOURCES: [SourceId; N_SOURCES] = [
    SourceId::Indication,
    SourceId::History,
    SourceId::Comparison,
    SourceId::Technique,
    SourceId::GeneratedFindings,
    SourceId::GeneratedImpression,
    SourceId::PriorFindings,
    SourceId::PriorImpression,
    SourceId::StudyImages,
    SourceId::PriorImages,
];

impl SourceId {
    pub fn index(self) -> usize {
        ALL_SOURCES.iter().position(|s| *s == self).unwrap()
    }

    pub fn for_section(section: &str) -> Option<SourceId> {
        match section {
            "indication" => Some(SourceId::Indication),
            "history" => Some(SourceId::History),
            "comparison" => Some(SourceId::Comparison),
            "technique" => Some(SourceId::Technique),
            _ => None,
        }
    }
}

/// Delta' = (delta/3600 + 1)^(-1/2); 1.0 at delta = 0, decreasing in delta.
pub fn time_delta_feature(delta_seconds: f64) -> Result<f64> {
    if !(delta_seconds >= 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "negative time delta {delta_seconds}"
        )));
    }
    Ok((delta_seconds / 3600.0 + 1.0).powf(-0.5))
}

/// D = GELU(delta' W1) W2, a 1 x d_model row.
pub fn time_delta_embedding(delta_seconds: f64, w1: &Var, w2: &Var) -> Result<Var> {
    let dprime = time_delta_feature(delta_seconds)?;
    let hidden = ops::gelu(&ops::scale(w1, dprime)?)?;
    ops::matmul(&hidden, w2)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::numkit::Array;

    #[test]
    fn feature_anchor_points() {
        assert_eq!(time_delta_feature(0.0).unwrap(), 1.0);
        assert_relative_eq!(
            time_delta_feature(3600.0).unwrap(),
            0.707_106_8,
            epsilon = 1e-6
        );
        assert_relative_eq!(time_delta_feature(10_800.0).unwrap(), 0.5, epsilon = 1e-12);
        assert!(time_delta_feature(-1.0).is_err());
    }

    #[test]
    fn feature_strictly_decreasing_in_unit_interval() {
        let mut prev = time_delta_feature(0.0).unwrap();
        for k in 1..50 {
            let v = time_delta_feature(k as f64 * 7200.0).unwrap();
            assert!(v < prev && v > 0.0 && v <= 1.0);
            prev = v;
        }
    }

    #[test]
    fn zero_w2_gives_zero_embedding() {
        let w1 = Var::leaf(Array::new(vec![1, 4], vec![0.3, -0.2, 0.9, 0.1]).unwrap());
        let w2 = Var::leaf(Array::zeros(vec![4, 6]));
        for delta in [0.0, 3600.0, 1e7] {
            let d = time_delta_embedding(delta, &w1, &w2).unwrap();
            assert!(d.value().data().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn ten_sources_with_stable_indices() {
        for (i, s) in ALL_SOURCES.iter().enumerate() {
            assert_eq!(s.index(), i);
        }
    }
}
