//! Evaluation criteria and protocols.
//!
//! SRCC measures prediction monotonicity; PLCC measures linearity after a
//! monotone four-parameter logistic mapping onto the MOS scale. Datasets
//! are evaluated over ten random 6:2:2 train/val/test splits with medians
//! reported, optionally followed by cross-dataset runs and the
//! spatial-vs-temporal improvement diagnostic.

pub mod correlation;
pub mod logistic;
pub mod protocol;
pub mod splits;

pub use correlation::{average_ranks, pearson, srcc, CorrelationError};
pub use logistic::{fit_logistic, logistic_value, plcc_with_logistic, LogisticFit};
pub use protocol::{
    cross_dataset_eval, easy_dataset_diagnostic, render_variant_table, run_protocol, weighted_average,
    DatasetFeatures, DiagnosticReport, EvalReport, ImprovementEntry, SeverityThresholds, SplitResult, VideoFeatures,
};
pub use splits::{make_splits, Partition, SplitPlan, PROTOCOL_SPLITS};

/// Lower median: for odd counts the true median, for even counts the lower
/// of the two central order statistics. `None` on empty input.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted[(sorted.len() - 1) / 2])
}
