//! Training losses with analytic gradients.
//!
//! Four objectives over a minibatch of pooled video scores: L1, L2, the
//! Pearson-correlation loss `(1 - r)/2`, and a differentiable Spearman
//! surrogate built on logistic soft ranks. All gradients are taken with
//! respect to the predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default soft-rank temperature, sized for roughly standardized scores.
pub const DEFAULT_SOFT_SRCC_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "loss")]
pub enum LossKind {
    L1,
    L2,
    Plcc,
    SoftSrcc { temperature: f64 },
}

impl Default for LossKind {
    fn default() -> Self {
        LossKind::Plcc
    }
}

impl LossKind {
    pub fn is_correlation(self) -> bool {
        matches!(self, LossKind::Plcc | LossKind::SoftSrcc { .. })
    }
}

/// Loss value plus gradient w.r.t. the predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Set when the correlation was undefined on the prediction side
    /// (zero variance): the loss sits at the documented 0.5 saddle with a
    /// zero gradient.
    pub degenerate: bool,
}

fn centered_sums(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>, f64, f64, f64) {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let da: Vec<f64> = a.iter().map(|v| v - mean_a).collect();
    let db: Vec<f64> = b.iter().map(|v| v - mean_b).collect();
    let s_ab = da.iter().zip(&db).map(|(x, y)| x * y).sum();
    let s_aa = da.iter().map(|x| x * x).sum();
    let s_bb = db.iter().map(|y| y * y).sum();
    (da, db, s_ab, s_aa, s_bb)
}

/// `(1 - r)/2` and its gradient; `None` when the prediction side has zero
/// variance (the saddle), error when the target side does.
fn pearson_loss_parts(predictions: &[f64], targets: &[f64]) -> Result<Option<LossOutput>> {
    let (da, db, s_ab, s_aa, s_bb) = centered_sums(predictions, targets);
    if s_bb <= 0.0 {
        return Err(Error::Train("correlation loss needs target variance > 0".into()));
    }
    if s_aa <= 0.0 {
        return Ok(None);
    }
    let denom = (s_aa * s_bb).sqrt();
    let r = s_ab / denom;
    let gradient = da
        .iter()
        .zip(&db)
        .map(|(&a_i, &b_i)| -0.5 * (b_i - (s_ab / s_aa) * a_i) / denom)
        .collect();
    Ok(Some(LossOutput { value: (1.0 - r) / 2.0, gradient, degenerate: false }))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Logistic soft ranks: `1 + sum_{j != i} sigmoid((v_i - v_j)/h)`.
pub fn soft_ranks(values: &[f64], temperature: f64) -> Vec<f64> {
    let n = values.len();
    let mut ranks = vec![1.0; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                ranks[i] += sigmoid((values[i] - values[j]) / temperature);
            }
        }
    }
    ranks
}

/// Loss value and analytic gradient w.r.t. `predictions`.
///
/// Correlation losses require at least two samples and positive target
/// variance; zero prediction variance there yields the documented saddle
/// (value 0.5, zero gradient, `degenerate` set) rather than an error.
pub fn loss_value_and_gradient(predictions: &[f64], targets: &[f64], kind: LossKind) -> Result<LossOutput> {
    let n = predictions.len();
    if n != targets.len() {
        return Err(Error::DimensionMismatch { expected: n, got: targets.len(), context: "loss targets".into() });
    }
    if n == 0 {
        return Err(Error::Train("empty minibatch".into()));
    }
    if kind.is_correlation() && n < 2 {
        return Err(Error::Train("correlation losses need a minibatch of at least 2".into()));
    }
    if predictions.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Train("non-finite loss input".into()));
    }

    let saddle = |n: usize| LossOutput { value: 0.5, gradient: vec![0.0; n], degenerate: true };

    match kind {
        LossKind::L1 => {
            let value = predictions.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum::<f64>() / n as f64;
            let gradient = predictions
                .iter()
                .zip(targets)
                .map(|(p, t)| {
                    let d = p - t;
                    if d == 0.0 {
                        0.0
                    } else {
                        d.signum() / n as f64
                    }
                })
                .collect();
            Ok(LossOutput { value, gradient, degenerate: false })
        }
        LossKind::L2 => {
            let value = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n as f64;
            let gradient = predictions.iter().zip(targets).map(|(p, t)| 2.0 * (p - t) / n as f64).collect();
            Ok(LossOutput { value, gradient, degenerate: false })
        }
        LossKind::Plcc => Ok(pearson_loss_parts(predictions, targets)?.unwrap_or_else(|| saddle(n))),
        LossKind::SoftSrcc { temperature } => {
            if !(temperature > 0.0) {
                return Err(Error::Train("soft-rank temperature must be positive".into()));
            }
            let rp = soft_ranks(predictions, temperature);
            let rt = soft_ranks(targets, temperature);
            let Some(base) = pearson_loss_parts(&rp, &rt)? else {
                return Ok(saddle(n));
            };
            // Chain rule through the soft ranks: d(rank_k)/d(p_i).
            let mut gradient = vec![0.0; n];
            for i in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    if k == i {
                        let mut diag = 0.0;
                        for j in 0..n {
                            if j != i {
                                let s = sigmoid((predictions[i] - predictions[j]) / temperature);
                                diag += s * (1.0 - s) / temperature;
                            }
                        }
                        acc += base.gradient[i] * diag;
                    } else {
                        let s = sigmoid((predictions[k] - predictions[i]) / temperature);
                        acc -= base.gradient[k] * s * (1.0 - s) / temperature;
                    }
                }
                gradient[i] = acc;
            }
            Ok(LossOutput { value: base.value, gradient, degenerate: false })
        }
    }
}
