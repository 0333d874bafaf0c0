//! Lexical rewards, the composite reward vector, and the paired
//! significance harness used by evaluation.

pub mod composite;
pub mod metrics;
pub mod significance;

pub use composite::{
    composite_reward, weighted_score, zero_reward, ReportSections, RewardSpec,
};
pub use metrics::{arn, bleu4, rouge_l};
pub use significance::{
    mean_square_within, paired_significance, studentized_range_cdf, tukey_q, AnovaResult,
    PairwiseComparison, SignificanceTable,
};

/// Evaluation summary: per-model means per metric plus the pairwise
/// significance table of the monitored metric.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub models: Vec<String>,
    pub metrics: Vec<String>,
    /// means[model][metric]
    pub means: Vec<Vec<f64>>,
    pub significance: Option<SignificanceTable>,
}
