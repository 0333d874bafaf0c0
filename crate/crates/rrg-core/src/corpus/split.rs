//! Patient-disjoint train/validation/test splits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::generate::StudyRecord;
use crate::error::{CoreError, Result};

#[derive(Debug, Clone)]
pub struct SplitSet {
    pub train: Vec<StudyRecord>,
    pub validation: Vec<StudyRecord>,
    pub test: Vec<StudyRecord>,
}

/// Splits by patient so no patient's studies straddle splits. Train and
/// validation keep only records with both findings and impression sections;
/// the filter is not applied to inlined priors.
pub fn split_dataset(corpus: &[StudyRecord], fractions: [f64; 3], seed: u64) -> Result<SplitSet> {
    if fractions.iter().any(|f| *f <= 0.0) {
        return Err(CoreError::InvalidArgument(
            "split fractions must be positive".into(),
        ));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CoreError::InvalidArgument(
            "split fractions must sum to 1".into(),
        ));
    }
    let mut by_patient: BTreeMap<&str, Vec<&StudyRecord>> = BTreeMap::new();
    for s in corpus {
        by_patient.entry(&s.patient_id).or_default().push(s);
    }
    let mut patients: Vec<&str> = by_patient.keys().copied().collect();
    if patients.len() < 3 {
        return Err(CoreError::InvalidArgument(format!(
            "need at least 3 patients for 3 splits, got {}",
            patients.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    patients.shuffle(&mut rng);

    let n = patients.len();
    let n_train = ((fractions[0] * n as f64).round() as usize).clamp(1, n - 2);
    let n_val = ((fractions[1] * n as f64).round() as usize).clamp(1, n - n_train - 1);

    let mut split = SplitSet {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (i, patient) in patients.iter().enumerate() {
        let bucket = if i < n_train {
            &mut split.train
        } else if i < n_train + n_val {
            &mut split.validation
        } else {
            &mut split.test
        };
        for s in &by_patient[patient] {
            bucket.push((*s).clone());
        }
    }
    split.train.retain(|s| s.has_findings_and_impression());
    split
        .validation
        .retain(|s| s.has_findings_and_impression());
    // stable order inside each split
    for bucket in [&mut split.train, &mut split.validation, &mut split.test] {
        bucket.sort_by(|a, b| a.study_id.cmp(&b.study_id));
    }
    Ok(split)
}
