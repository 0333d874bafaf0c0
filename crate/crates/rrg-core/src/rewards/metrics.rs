//! Lexical metrics: absence of repeated n-grams, sentence BLEU-4 with
//! add-one smoothing, and ROUGE-L F1.

use std::collections::HashMap;
use std::collections::HashSet;

use crate::model::word_split;

/// 1 - max over n in {2,3,4} of (1 - distinct/total n-grams); 1.0 when the
/// text has no n-grams in range.
pub fn arn(text: &str) -> f64 {
    let tokens = word_split(text);
    let mut worst = 0.0f64;
    for n in 2..=4usize {
        if tokens.len() < n {
            continue;
        }
        let total = tokens.len() - n + 1;
        let distinct: HashSet<&[String]> = tokens.windows(n).collect();
        let rep = 1.0 - distinct.len() as f64 / total as f64;
        worst = worst.max(rep);
    }
    1.0 - worst
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Sentence-level BLEU-4. Modified precisions for n = 2..4 get add-one
/// smoothing in both numerator and denominator; unigram precision is
/// unsmoothed so disjoint texts score 0. Brevity penalty
/// exp(min(0, 1 - ref_len/hyp_len)).
pub fn bleu4(hypothesis: &str, reference: &str) -> f64 {
    let hyp = word_split(hypothesis);
    let refr = word_split(reference);
    if hyp.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4usize {
        let total = hyp.len().saturating_sub(n - 1);
        let ref_counts = ngram_counts(&refr, n);
        let mut matched = 0usize;
        if total > 0 {
            let mut hyp_counts = ngram_counts(&hyp, n);
            for (gram, count) in hyp_counts.drain() {
                matched += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
        }
        let p = if n == 1 {
            if total == 0 || matched == 0 {
                return 0.0;
            }
            matched as f64 / total as f64
        } else {
            (matched + 1) as f64 / (total + 1) as f64
        };
        log_sum += p.ln();
    }
    let bp = (1.0 - refr.len() as f64 / hyp.len() as f64).min(0.0).exp();
    bp * (log_sum / 4.0).exp()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// LCS-based F1: P = LCS/|hyp|, R = LCS/|ref|.
pub fn rouge_l(hypothesis: &str, reference: &str) -> f64 {
    let hyp = word_split(hypothesis);
    let refr = word_split(reference);
    if hyp.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&hyp, &refr);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / hyp.len() as f64;
    let r = lcs as f64 / refr.len() as f64;
    2.0 * p * r / (p + r)
}
