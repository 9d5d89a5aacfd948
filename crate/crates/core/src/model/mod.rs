//! Quality regressor: per-key-frame linear scoring, temporal pooling into
//! a video score, and correlation-loss training.

pub mod loss;
pub mod train;
pub mod variants;

pub use loss::{loss_value_and_gradient, LossKind, LossOutput};
pub use train::{train_head, TrainConfig, TrainingLog};
pub use variants::{variant_registry, VariantSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default learned-pooling kernel size.
pub const LEARNED_POOL_KERNEL: usize = 5;

/// Pooling of per-key-frame scores into one video score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScorePooling {
    /// Arithmetic mean (the default).
    SimpleAverage,
    /// 1-D convolution with reflective padding over the score sequence,
    /// followed by the arithmetic mean of the convolved sequence. The
    /// kernel weights are trained alongside the projection.
    LearnedConv { weights: Vec<f64> },
}

impl ScorePooling {
    pub fn learned(kernel: usize) -> Self {
        ScorePooling::LearnedConv { weights: vec![1.0 / kernel as f64; kernel] }
    }
}

/// Per-dimension affine normalization fitted on the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    /// Population standard deviation; dimensions with zero spread get 1.
    pub scale: Vec<f64>,
}

impl Standardization {
    /// Fits mean/scale over all rows (population statistics).
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).ok_or_else(|| Error::Train("no feature rows".into()))?;
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len(), context: "feature row".into() });
            }
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut scale = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in scale.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in scale.iter_mut() {
            *s = (*s / n).sqrt();
            if *s <= 0.0 {
                *s = 1.0;
            }
        }
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// The trained quality regressor.
///
/// Serialized as a human-diffable JSON document carrying everything needed
/// to reproduce scores: projection, bias, pooling weights, standardization
/// vectors, plus the run config digest and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionHead {
    /// Linear projection over the standardized feature vector.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub pooling: ScorePooling,
    pub standardization: Standardization,
    /// Hex digest of the run configuration that produced this head.
    pub config_digest: String,
    pub seed: u64,
}

impl RegressionHead {
    pub fn feature_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let head: Self = serde_json::from_str(text)?;
        if head.standardization.dim() != head.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: head.weights.len(),
                got: head.standardization.dim(),
                context: "head standardization".into(),
            });
        }
        Ok(head)
    }
}

/// Per-key-frame and pooled video score for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub per_frame: Vec<f64>,
    pub video: f64,
}

/// Per-key-frame linear scores: `<standardize(row), weights> + bias`.
pub fn score_frames(rows: &[Vec<f64>], head: &RegressionHead) -> Result<Vec<f64>> {
    rows.iter()
        .map(|row| {
            if row.len() != head.feature_dim() {
                return Err(Error::DimensionMismatch {
                    expected: head.feature_dim(),
                    got: row.len(),
                    context: "feature row vs head".into(),
                });
            }
            let z = head.standardization.apply(row);
            Ok(z.iter().zip(&head.weights).map(|(a, b)| a * b).sum::<f64>() + head.bias)
        })
        .collect()
}

/// Bounce reflection of an out-of-range index into `[0, n)`.
fn reflect_index(i: i64, n: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as i64 {
        m = period - m;
    }
    m as usize
}

/// Cross-correlation of the score sequence with `weights`, reflective padding.
pub fn convolve_reflect(scores: &[f64], weights: &[f64]) -> Vec<f64> {
    let pad = weights.len() as i64 / 2;
    (0..scores.len() as i64)
        .map(|i| {
            weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * scores[reflect_index(i + k as i64 - pad, scores.len())])
                .sum()
        })
        .collect()
}

/// Pools per-key-frame scores into the video score.
pub fn pool_scores(scores: &[f64], pooling: &ScorePooling) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("no scores to pool".into()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    match pooling {
        ScorePooling::SimpleAverage => Ok(mean(scores)),
        ScorePooling::LearnedConv { weights } => {
            if weights.is_empty() {
                return Err(Error::Config("learned pooling kernel is empty".into()));
            }
            Ok(mean(&convolve_reflect(scores, weights)))
        }
    }
}

/// Scores one video end to end.
pub fn score_video(rows: &[Vec<f64>], head: &RegressionHead) -> Result<QualityScore> {
    let per_frame = score_frames(rows, head)?;
    let video = pool_scores(&per_frame, &head.pooling)?;
    Ok(QualityScore { per_frame, video })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn head(weights: Vec<f64>, bias: f64) -> RegressionHead {
        let dim = weights.len();
        RegressionHead {
            weights,
            bias,
            pooling: ScorePooling::SimpleAverage,
            standardization: Standardization { mean: vec![0.0; dim], scale: vec![1.0; dim] },
            config_digest: String::new(),
            seed: 0,
        }
    }

    #[test]
    fn zero_weights_score_bias_everywhere() {
        let h = head(vec![0.0, 0.0], 4.25);
        let rows = vec![vec![1.0, -3.0], vec![100.0, 7.0], vec![0.0, 0.0]];
        assert_eq!(score_frames(&rows, &h).unwrap(), vec![4.25; 3]);
    }

    #[test]
    fn hand_inner_products() {
        let h = head(vec![2.0, -1.0], 0.0);
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(score_frames(&rows, &h).unwrap(), vec![2.0, -1.0, 1.0]);
    }

    #[test]
    fn duplicated_row_duplicates_score() {
        let h = head(vec![0.5, 1.5, -2.0], 1.0);
        let rows = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        let scores = score_frames(&rows, &h).unwrap();
        assert_eq!(scores[0], scores[1]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let h = head(vec![1.0, 2.0], 0.0);
        assert!(score_frames(&[vec![1.0]], &h).is_err());
    }

    #[test]
    fn simple_average_pooling() {
        assert_eq!(pool_scores(&[1.0, 2.0, 3.0], &ScorePooling::SimpleAverage).unwrap(), 2.0);
    }

    #[test]
    fn constant_sequence_invariant_under_sum_one_kernel() {
        let pooling = ScorePooling::LearnedConv { weights: vec![0.1, 0.2, 0.4, 0.2, 0.1] };
        let v = pool_scores(&[3.0, 3.0, 3.0], &pooling).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
        assert_eq!(pool_scores(&[3.0, 3.0, 3.0], &ScorePooling::SimpleAverage).unwrap(), 3.0);
    }

    #[test]
    fn learned_conv_matches_direct_oracle() {
        // Direct reflective-padding convolution, written out independently.
        let scores = [0.0, 0.0, 1.0, 0.0, 0.0];
        let weights = [0.1, 0.2, 0.4, 0.2, 0.1];
        let n = scores.len() as i64;
        let reflect = |mut i: i64| -> usize {
            while i < 0 || i >= n {
                if i < 0 {
                    i = -i;
                }
                if i >= n {
                    i = 2 * (n - 1) - i;
                }
            }
            i as usize
        };
        let mut expect = 0.0;
        for i in 0..n {
            for (k, w) in weights.iter().enumerate() {
                expect += w * scores[reflect(i + k as i64 - 2)];
            }
        }
        expect /= n as f64;
        let got =
            pool_scores(&scores, &ScorePooling::LearnedConv { weights: weights.to_vec() }).unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn simple_average_is_permutation_invariant() {
        let a = pool_scores(&[1.0, 5.0, 2.0, 4.0], &ScorePooling::SimpleAverage).unwrap();
        let b = pool_scores(&[5.0, 4.0, 1.0, 2.0], &ScorePooling::SimpleAverage).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn standardization_fixes_mean_and_scale() {
        let rows = vec![vec![1.0, 10.0], vec![3.0, 10.0], vec![5.0, 10.0]];
        let s = Standardization::fit(&rows).unwrap();
        assert_eq!(s.mean, vec![3.0, 10.0]);
        // Constant dimension falls back to unit scale.
        assert_eq!(s.scale[1], 1.0);
        let z = s.apply(&[5.0, 10.0]);
        assert!((z[0] - (2.0 / s.scale[0])).abs() < 1e-12);
        assert_eq!(z[1], 0.0);
    }

    #[test]
    fn head_json_round_trip() {
        let h = RegressionHead {
            weights: vec![0.25, -1.5],
            bias: 0.75,
            pooling: ScorePooling::learned(5),
            standardization: Standardization { mean: vec![1.0, 2.0], scale: vec![3.0, 4.0] },
            config_digest: "abcd".into(),
            seed: 42,
        };
        let json = h.to_json().unwrap();
        assert_eq!(RegressionHead::from_json(&json).unwrap(), h);
    }
}
