//! Split protocol, report assembly, cross-dataset evaluation, and the
//! easy-dataset diagnostic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::correlation::srcc;
use crate::eval::logistic::{plcc_with_logistic, LogisticFit};
use crate::eval::lower_median;
use crate::eval::splits::SplitPlan;
use crate::features::FeatureRecord;
use crate::model::train::{train_head, LabeledVideo, TrainConfig};
use crate::model::{score_video, RegressionHead, ScorePooling};

/// One video's assembled feature rows and label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoFeatures {
    pub video_id: String,
    pub mos: f64,
    /// Key-frame rows, each `[s_i || t_i]`.
    pub rows: Vec<Vec<f64>>,
}

/// A dataset ready for protocol runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFeatures {
    pub dataset_id: String,
    pub videos: Vec<VideoFeatures>,
}

impl DatasetFeatures {
    /// Assembles per-video rows from cached feature records. With
    /// `use_temporal` the temporal vector is concatenated onto each row
    /// and must be present in every record.
    pub fn from_records(
        dataset_id: impl Into<String>,
        items: Vec<(String, f64, Vec<FeatureRecord>)>,
        use_temporal: bool,
    ) -> Result<Self> {
        let videos = items
            .into_iter()
            .map(|(video_id, mos, records)| {
                if records.is_empty() {
                    return Err(Error::Eval(format!("video `{video_id}` has no feature records")));
                }
                let rows = records
                    .iter()
                    .map(|r| {
                        if use_temporal {
                            if r.temporal.is_none() {
                                return Err(Error::Eval(format!(
                                    "video `{video_id}` lacks temporal features required by the variant"
                                )));
                            }
                            Ok(r.row())
                        } else {
                            Ok(r.spatial.iter().map(|&v| v as f64).collect())
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(VideoFeatures { video_id, mos, rows })
            })
            .collect::<Result<Vec<_>>>()?;
        let ds = Self { dataset_id: dataset_id.into(), videos };
        ds.feature_dim()?;
        Ok(ds)
    }

    pub fn ids(&self) -> Vec<String> {
        self.videos.iter().map(|v| v.video_id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    /// The common row dimension, verified across every video.
    pub fn feature_dim(&self) -> Result<usize> {
        let dim = self
            .videos
            .first()
            .and_then(|v| v.rows.first())
            .map(|r| r.len())
            .ok_or_else(|| Error::Eval("empty dataset".into()))?;
        for v in &self.videos {
            for row in &v.rows {
                if row.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: row.len(),
                        context: format!("feature rows of `{}`", v.video_id),
                    });
                }
            }
        }
        Ok(dim)
    }

    fn labeled(&self, ids: &[String]) -> Result<Vec<LabeledVideo>> {
        ids.iter()
            .map(|id| {
                self.videos
                    .iter()
                    .find(|v| &v.video_id == id)
                    .map(|v| (v.rows.clone(), v.mos))
                    .ok_or_else(|| Error::Eval(format!("id `{id}` not in dataset `{}`", self.dataset_id)))
            })
            .collect()
    }
}

/// Metrics of one protocol split. Undefined correlations (degenerate test
/// sets) stay `None`; failed training is recorded in `failure`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub split_index: usize,
    pub srcc: Option<f64>,
    pub plcc: Option<f64>,
    pub logistic: Option<LogisticFit>,
    pub val_srcc: Option<f64>,
    pub failure: Option<String>,
}

/// Improvement of one metric over a baseline report, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementEntry {
    pub metric: String,
    pub baseline: f64,
    pub augmented: f64,
    pub delta_percent: f64,
}

/// Full evaluation report for one (dataset, variant) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_id: String,
    pub variant_id: String,
    pub n_videos: usize,
    pub seed: u64,
    pub config_digest: String,
    pub splits: Vec<SplitResult>,
    /// Lower median over splits with a defined value.
    pub median_srcc: Option<f64>,
    pub median_plcc: Option<f64>,
    pub completed_splits: usize,
    pub failed_splits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improvement_over_baseline: Option<Vec<ImprovementEntry>>,
}

impl EvalReport {
    fn from_splits(
        dataset_id: &str,
        variant_id: &str,
        n_videos: usize,
        seed: u64,
        config_digest: &str,
        splits: Vec<SplitResult>,
    ) -> Self {
        let srcc_values: Vec<f64> = splits.iter().filter_map(|s| s.srcc).collect();
        let plcc_values: Vec<f64> = splits.iter().filter_map(|s| s.plcc).collect();
        let failed = splits.iter().filter(|s| s.failure.is_some()).count();
        Self {
            dataset_id: dataset_id.into(),
            variant_id: variant_id.into(),
            n_videos,
            seed,
            config_digest: config_digest.into(),
            median_srcc: lower_median(&srcc_values),
            median_plcc: lower_median(&plcc_values),
            completed_splits: splits.len() - failed,
            failed_splits: failed,
            splits,
            improvement_over_baseline: None,
        }
    }
}

/// Evaluates one head on a labeled set: SRCC plus logistic-mapped PLCC.
fn evaluate_predictions(predictions: &[f64], targets: &[f64]) -> (Option<f64>, Option<f64>, Option<LogisticFit>) {
    let srcc_value = match srcc(predictions, targets) {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("SRCC undefined: {e}");
            None
        }
    };
    match plcc_with_logistic(predictions, targets) {
        Ok((plcc, fit)) => (srcc_value, Some(plcc), Some(fit)),
        Err(e) => {
            log::warn!("PLCC undefined: {e}");
            (srcc_value, None, None)
        }
    }
}

/// Runs the full split protocol: per partition, train on train, select on
/// val, report SRCC/PLCC on test; medians over completed splits.
///
/// Each split trains with `train.seed + split_index` so splits are
/// independent yet the whole run stays reproducible.
pub fn run_protocol(
    dataset: &DatasetFeatures,
    variant_id: &str,
    pooling: &ScorePooling,
    train: &TrainConfig,
    plan: &SplitPlan,
    config_digest: &str,
) -> Result<EvalReport> {
    dataset.feature_dim()?;
    let mut splits = Vec::with_capacity(plan.partitions.len());
    for (index, partition) in plan.partitions.iter().enumerate() {
        let mut split_train = train.clone();
        split_train.seed = train.seed.wrapping_add(index as u64);
        let outcome = (|| -> Result<SplitResult> {
            let train_set = dataset.labeled(&partition.train)?;
            let val_set = dataset.labeled(&partition.val)?;
            let test_set = dataset.labeled(&partition.test)?;
            let (head, log) = train_head(&train_set, &val_set, pooling.clone(), &split_train)?;
            let predictions = test_set
                .iter()
                .map(|(rows, _)| score_video(rows, &head).map(|q| q.video))
                .collect::<Result<Vec<f64>>>()?;
            let targets: Vec<f64> = test_set.iter().map(|(_, mos)| *mos).collect();
            let (srcc_value, plcc_value, fit) = evaluate_predictions(&predictions, &targets);
            Ok(SplitResult {
                split_index: index,
                srcc: srcc_value,
                plcc: plcc_value,
                logistic: fit,
                val_srcc: log.selected_val_srcc,
                failure: None,
            })
        })();
        match outcome {
            Ok(result) => splits.push(result),
            Err(e) => {
                log::warn!("split {index} failed: {e}");
                splits.push(SplitResult {
                    split_index: index,
                    srcc: None,
                    plcc: None,
                    logistic: None,
                    val_srcc: None,
                    failure: Some(e.to_string()),
                });
            }
        }
    }
    Ok(EvalReport::from_splits(&dataset.dataset_id, variant_id, dataset.len(), plan.seed, config_digest, splits))
}

/// Evaluates a trained head on a whole foreign dataset without any
/// parameter update.
pub fn cross_dataset_eval(
    head: &RegressionHead,
    variant_id: &str,
    target: &DatasetFeatures,
    config_digest: &str,
) -> Result<EvalReport> {
    let dim = target.feature_dim()?;
    if dim != head.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: head.feature_dim(),
            got: dim,
            context: format!("dataset `{}` vs trained head", target.dataset_id),
        });
    }
    let predictions = target
        .videos
        .iter()
        .map(|v| score_video(&v.rows, head).map(|q| q.video))
        .collect::<Result<Vec<f64>>>()?;
    let targets: Vec<f64> = target.videos.iter().map(|v| v.mos).collect();
    let (srcc_value, plcc_value, fit) = evaluate_predictions(&predictions, &targets);
    let split = SplitResult {
        split_index: 0,
        srcc: srcc_value,
        plcc: plcc_value,
        logistic: fit,
        val_srcc: None,
        failure: None,
    };
    Ok(EvalReport::from_splits(&target.dataset_id, variant_id, target.len(), head.seed, config_digest, vec![split]))
}

/// Weighted average with weights proportional to the per-dataset counts.
pub fn weighted_average(pairs: &[(usize, f64)]) -> Option<f64> {
    let total: usize = pairs.iter().map(|(n, _)| n).sum();
    if total == 0 {
        return None;
    }
    Some(pairs.iter().map(|(n, m)| *n as f64 * m).sum::<f64>() / total as f64)
}

/// Severity cutoffs on the SRCC improvement percentage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeverityThresholds {
    /// Below this the dataset counts as spatial-dominated.
    pub spatial_max: f64,
    /// Between `spatial_max` and this it counts as mixed; above,
    /// temporal-dependent.
    pub mixed_max: f64,
}

impl Default for SeverityThresholds {
    fn default() -> Self {
        Self { spatial_max: 2.0, mixed_max: 10.0 }
    }
}

impl SeverityThresholds {
    pub fn label(&self, srcc_delta_percent: f64) -> &'static str {
        if srcc_delta_percent < self.spatial_max {
            "spatial-dominated"
        } else if srcc_delta_percent <= self.mixed_max {
            "mixed"
        } else {
            "temporal-dependent"
        }
    }
}

/// Outcome of comparing an augmented variant against its baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub dataset_id: String,
    pub baseline_variant: String,
    pub augmented_variant: String,
    pub improvements: Vec<ImprovementEntry>,
    /// Severity of the easy-dataset problem, judged on the SRCC delta;
    /// `None` when that delta is undefined.
    pub severity: Option<String>,
    pub thresholds: SeverityThresholds,
}

/// Improvement percentages `100 * (augmented - baseline) / baseline` per
/// metric, plus the severity label from the SRCC delta.
pub fn easy_dataset_diagnostic(
    baseline: &EvalReport,
    augmented: &EvalReport,
    thresholds: SeverityThresholds,
) -> Result<DiagnosticReport> {
    if baseline.dataset_id != augmented.dataset_id {
        return Err(Error::Eval(format!(
            "diagnostic compares different datasets: `{}` vs `{}`",
            baseline.dataset_id, augmented.dataset_id
        )));
    }
    let mut improvements = Vec::new();
    let mut srcc_delta = None;
    for (metric, base, aug) in [
        ("srcc", baseline.median_srcc, augmented.median_srcc),
        ("plcc", baseline.median_plcc, augmented.median_plcc),
    ] {
        if let (Some(b), Some(a)) = (base, aug) {
            if b != 0.0 {
                let delta = 100.0 * (a - b) / b;
                if metric == "srcc" {
                    srcc_delta = Some(delta);
                }
                improvements.push(ImprovementEntry {
                    metric: metric.into(),
                    baseline: b,
                    augmented: a,
                    delta_percent: delta,
                });
            }
        }
    }
    Ok(DiagnosticReport {
        dataset_id: baseline.dataset_id.clone(),
        baseline_variant: baseline.variant_id.clone(),
        augmented_variant: augmented.variant_id.clone(),
        improvements,
        severity: srcc_delta.map(|d| thresholds.label(d).to_string()),
        thresholds,
    })
}

fn format_cell(value: Option<f64>) -> String {
    value.map_or(String::new(), |v| format!("{v:.3}"))
}

/// Renders reports as a delimited table: one row per variant with
/// SRCC/PLCC columns per dataset plus the weighted average, and an
/// improvement row under every non-baseline variant when a baseline is
/// named.
pub fn render_variant_table(reports: &[EvalReport], baseline_variant: Option<&str>) -> String {
    let mut datasets: Vec<String> = Vec::new();
    let mut variants: Vec<String> = Vec::new();
    for r in reports {
        if !datasets.contains(&r.dataset_id) {
            datasets.push(r.dataset_id.clone());
        }
        if !variants.contains(&r.variant_id) {
            variants.push(r.variant_id.clone());
        }
    }
    let find = |variant: &str, dataset: &str| reports.iter().find(|r| r.variant_id == variant && r.dataset_id == dataset);

    let mut out = String::from("variant");
    for d in &datasets {
        out.push_str(&format!(",{d} SRCC,{d} PLCC"));
    }
    out.push_str(",W.A. SRCC,W.A. PLCC\n");

    for variant in &variants {
        let mut line = variant.clone();
        let mut wa_srcc = Vec::new();
        let mut wa_plcc = Vec::new();
        for dataset in &datasets {
            let report = find(variant, dataset);
            let srcc_value = report.and_then(|r| r.median_srcc);
            let plcc_value = report.and_then(|r| r.median_plcc);
            if let (Some(r), Some(v)) = (report, srcc_value) {
                wa_srcc.push((r.n_videos, v));
            }
            if let (Some(r), Some(v)) = (report, plcc_value) {
                wa_plcc.push((r.n_videos, v));
            }
            line.push_str(&format!(",{},{}", format_cell(srcc_value), format_cell(plcc_value)));
        }
        line.push_str(&format!(
            ",{},{}\n",
            format_cell(weighted_average(&wa_srcc)),
            format_cell(weighted_average(&wa_plcc))
        ));
        out.push_str(&line);

        if let Some(base_id) = baseline_variant {
            if variant != base_id {
                let mut imp_line = format!("{variant} improvement over {base_id} (%)");
                let mut any = false;
                for dataset in &datasets {
                    let base = find(base_id, dataset);
                    let aug = find(variant, dataset);
                    for metric in [|r: &EvalReport| r.median_srcc, |r: &EvalReport| r.median_plcc] {
                        let cell = match (base.and_then(metric), aug.and_then(metric)) {
                            (Some(b), Some(a)) if b != 0.0 => {
                                any = true;
                                format!("{:+.1}", 100.0 * (a - b) / b)
                            }
                            _ => String::new(),
                        };
                        imp_line.push_str(&format!(",{cell}"));
                    }
                }
                imp_line.push_str(",,\n");
                if any {
                    out.push_str(&imp_line);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(dataset: &str, variant: &str, n: usize, srcc: f64, plcc: f64) -> EvalReport {
        EvalReport {
            dataset_id: dataset.into(),
            variant_id: variant.into(),
            n_videos: n,
            seed: 0,
            config_digest: String::new(),
            splits: Vec::new(),
            median_srcc: Some(srcc),
            median_plcc: Some(plcc),
            completed_splits: 10,
            failed_splits: 0,
            improvement_over_baseline: None,
        }
    }

    #[test]
    fn weighted_average_examples() {
        assert!((weighted_average(&[(10, 0.8), (10, 0.6)]).unwrap() - 0.7).abs() < 1e-12);
        assert!((weighted_average(&[(100, 0.8), (300, 0.6)]).unwrap() - 0.65).abs() < 1e-12);
        assert!((weighted_average(&[(42, 0.77)]).unwrap() - 0.77).abs() < 1e-12);
        assert_eq!(weighted_average(&[]), None);
    }

    #[test]
    fn weighted_average_stays_within_bounds() {
        let pairs = [(3, 0.2), (17, 0.9), (5, 0.4)];
        let wa = weighted_average(&pairs).unwrap();
        assert!(wa >= 0.2 && wa <= 0.9);
    }

    #[test]
    fn diagnostic_percentages_match_hand_computation() {
        let base = report("lbvd-like", "I", 100, 0.704, 0.706);
        let aug = report("lbvd-like", "IV", 100, 0.882, 0.881);
        let d = easy_dataset_diagnostic(&base, &aug, SeverityThresholds::default()).unwrap();
        let srcc_imp = d.improvements.iter().find(|i| i.metric == "srcc").unwrap();
        assert!((srcc_imp.delta_percent - 25.284).abs() < 0.01, "{}", srcc_imp.delta_percent);
        assert_eq!(d.severity.as_deref(), Some("temporal-dependent"));
    }

    #[test]
    fn diagnostic_other_direction() {
        let base = report("vqc-like", "I", 50, 0.653, 0.719);
        let aug = report("vqc-like", "IV", 50, 0.752, 0.798);
        let d = easy_dataset_diagnostic(&base, &aug, SeverityThresholds::default()).unwrap();
        let srcc_imp = d.improvements.iter().find(|i| i.metric == "srcc").unwrap();
        assert!((srcc_imp.delta_percent - 15.16).abs() < 0.01, "{}", srcc_imp.delta_percent);
    }

    #[test]
    fn equal_reports_are_spatial_dominated() {
        let base = report("ds", "I", 10, 0.8, 0.81);
        let aug = report("ds", "IV", 10, 0.8, 0.81);
        let d = easy_dataset_diagnostic(&base, &aug, SeverityThresholds::default()).unwrap();
        assert!(d.improvements.iter().all(|i| i.delta_percent == 0.0));
        assert_eq!(d.severity.as_deref(), Some("spatial-dominated"));
    }

    #[test]
    fn diagnostic_rejects_mismatched_datasets() {
        let base = report("a", "I", 10, 0.8, 0.8);
        let aug = report("b", "IV", 10, 0.9, 0.9);
        assert!(easy_dataset_diagnostic(&base, &aug, SeverityThresholds::default()).is_err());
    }

    #[test]
    fn table_layout_contains_variants_datasets_and_improvements() {
        let reports = vec![
            report("dsA", "I", 100, 0.70, 0.71),
            report("dsB", "I", 300, 0.60, 0.61),
            report("dsA", "IV", 100, 0.80, 0.82),
            report("dsB", "IV", 300, 0.66, 0.67),
        ];
        let table = render_variant_table(&reports, Some("I"));
        let mut lines = table.lines();
        assert_eq!(lines.next().unwrap(), "variant,dsA SRCC,dsA PLCC,dsB SRCC,dsB PLCC,W.A. SRCC,W.A. PLCC");
        let row_i = lines.next().unwrap();
        assert!(row_i.starts_with("I,0.700,0.710,0.600,0.610,"));
        // W.A. = (100*0.7 + 300*0.6)/400 = 0.625.
        assert!(row_i.ends_with("0.625,0.635"));
        let row_iv = lines.next().unwrap();
        assert!(row_iv.starts_with("IV,0.800,0.820,0.660,0.670,"));
        let imp = lines.next().unwrap();
        assert!(imp.starts_with("IV improvement over I (%),+14.3,+15.5,+10.0,+9.8"));
    }
}
