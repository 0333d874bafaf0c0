//! Iterative stratified sampling: repeatedly top up the target finding with
//! the fewest selected studies, one study per patient.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::catalogue::{Finding, ALL_FINDINGS};
use super::generate::StudyRecord;
use crate::error::{CoreError, Result};

/// Selects `n` studies from `pool` (returned as pool indices). Each round
/// picks the target finding with the fewest selected studies (ties broken in
/// catalogue order), samples uniformly among its remaining positives from
/// unselected patients, and updates all target counts from the pick.
pub fn stratified_sample(
    pool: &[StudyRecord],
    targets: &[Finding],
    n: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if targets.is_empty() {
        return Err(CoreError::InvalidArgument(
            "stratified_sample needs at least one target finding".into(),
        ));
    }
    // catalogue order is the documented tie-break order
    let ordered_targets: Vec<Finding> = ALL_FINDINGS
        .iter()
        .copied()
        .filter(|f| targets.contains(f))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; ordered_targets.len()];
    let mut selected = Vec::with_capacity(n);
    let mut selected_idx: HashSet<usize> = HashSet::new();
    let mut selected_patients: HashSet<&str> = HashSet::new();

    while selected.len() < n {
        let min_pos = counts
            .iter()
            .enumerate()
            .min_by_key(|(_, c)| **c)
            .map(|(i, _)| i)
            .unwrap();
        let target = ordered_targets[min_pos];
        let candidates: Vec<usize> = pool
            .iter()
            .enumerate()
            .filter(|(i, s)| {
                !selected_idx.contains(i)
                    && !selected_patients.contains(s.patient_id.as_str())
                    && s.findings.contains(&target)
            })
            .map(|(i, _)| i)
            .collect();
        if candidates.is_empty() {
            return Err(CoreError::InvalidArgument(format!(
                "pool exhausted for finding '{}' after {} selections",
                target.name(),
                selected.len()
            )));
        }
        let pick = candidates[rng.gen_range(0..candidates.len())];
        selected_idx.insert(pick);
        selected_patients.insert(pool[pick].patient_id.as_str());
        for (j, f) in ordered_targets.iter().enumerate() {
            if pool[pick].findings.contains(f) {
                counts[j] += 1;
            }
        }
        selected.push(pick);
    }
    Ok(selected)
}
