//! Minibatch gradient-descent training of the regression head.
//!
//! The loss is computed per minibatch on pooled video scores; parameters
//! (projection, bias, and the pooling kernel when learned) are updated
//! with adaptive-moment estimation. After every epoch the head is scored
//! on the validation set by SRCC and the best snapshot is returned.
//! Everything is driven by one seeded generator, so a fixed seed gives a
//! bit-identical parameter trajectory.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::srcc;
use crate::model::loss::{loss_value_and_gradient, LossKind};
use crate::model::{convolve_reflect, RegressionHead, ScorePooling, Standardization};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

/// Optimizer and schedule knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub loss: LossKind,
    pub learning_rate: f64,
    pub minibatch: usize,
    pub epochs: usize,
    /// Learning rate is divided by this factor after each epoch listed in
    /// `decay_epochs`.
    pub decay_factor: f64,
    pub decay_epochs: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Plcc,
            learning_rate: 1e-5,
            minibatch: 8,
            epochs: 30,
            decay_factor: 10.0,
            decay_epochs: vec![10],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.minibatch == 0 {
            return Err(Error::Config("minibatch must be positive".into()));
        }
        if self.loss.is_correlation() && self.minibatch < 2 {
            return Err(Error::Config("correlation losses need minibatch >= 2".into()));
        }
        if !(self.decay_factor >= 1.0) {
            return Err(Error::Config("decay_factor must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_batch_loss: f64,
    pub val_srcc: Option<f64>,
    /// Batches that hit the zero-prediction-variance saddle.
    pub degenerate_batches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub loss: LossKind,
    pub seed: u64,
    pub epochs: Vec<EpochLog>,
    /// Epoch whose snapshot was returned (best validation SRCC).
    pub selected_epoch: usize,
    pub selected_val_srcc: Option<f64>,
}

/// One video's feature rows (key frames x dims) and its MOS label.
pub type LabeledVideo = (Vec<Vec<f64>>, f64);

struct Parameters {
    weights: Vec<f64>,
    bias: f64,
    kernel: Option<Vec<f64>>,
}

impl Parameters {
    fn pooling(&self) -> ScorePooling {
        match &self.kernel {
            None => ScorePooling::SimpleAverage,
            Some(w) => ScorePooling::LearnedConv { weights: w.clone() },
        }
    }

    fn flat_len(&self) -> usize {
        self.weights.len() + 1 + self.kernel.as_ref().map_or(0, |k| k.len())
    }
}

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

/// Forward pass over standardized rows: per-frame scores plus video score.
fn forward(rows: &[Vec<f64>], params: &Parameters) -> (Vec<f64>, f64) {
    let per_frame: Vec<f64> = rows
        .iter()
        .map(|z| z.iter().zip(&params.weights).map(|(a, b)| a * b).sum::<f64>() + params.bias)
        .collect();
    let k = per_frame.len() as f64;
    let video = match &params.kernel {
        None => per_frame.iter().sum::<f64>() / k,
        Some(w) => convolve_reflect(&per_frame, w).iter().sum::<f64>() / k,
    };
    (per_frame, video)
}

/// Accumulates parameter gradients for one video given d(loss)/d(video score).
fn backward(
    rows: &[Vec<f64>],
    per_frame: &[f64],
    upstream: f64,
    params: &Parameters,
    grad_weights: &mut [f64],
    grad_bias: &mut f64,
    grad_kernel: &mut Option<Vec<f64>>,
) {
    let k = per_frame.len();
    let inv_k = 1.0 / k as f64;
    // d(video)/d(per_frame[j]).
    let mut frame_grad = vec![0.0; k];
    match &params.kernel {
        None => frame_grad.iter_mut().for_each(|g| *g = inv_k),
        Some(w) => {
            let pad = w.len() as i64 / 2;
            for i in 0..k as i64 {
                for (ki, &wv) in w.iter().enumerate() {
                    frame_grad[reflect_index(i + ki as i64 - pad, k)] += wv * inv_k;
                }
            }
            if let Some(gk) = grad_kernel.as_mut() {
                for (ki, g) in gk.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for i in 0..k as i64 {
                        acc += per_frame[reflect_index(i + ki as i64 - pad, k)];
                    }
                    *g += upstream * acc * inv_k;
                }
            }
        }
    }
    for (j, z) in rows.iter().enumerate() {
        let g = upstream * frame_grad[j];
        for (gw, zv) in grad_weights.iter_mut().zip(z) {
            *gw += g * zv;
        }
        *grad_bias += g;
    }
}

fn standardize_videos(videos: &[LabeledVideo], standardization: &Standardization) -> Vec<(Vec<Vec<f64>>, f64)> {
    videos
        .iter()
        .map(|(rows, mos)| (rows.iter().map(|r| standardization.apply(r)).collect(), *mos))
        .collect()
}

fn predict_all(videos: &[(Vec<Vec<f64>>, f64)], params: &Parameters) -> Vec<f64> {
    videos.iter().map(|(rows, _)| forward(rows, params).1).collect()
}

/// Trains a head on `train`, selecting the epoch with the best validation
/// SRCC. `pooling` chooses the pooling structure; a learned kernel starts
/// uniform and is optimized jointly with the projection.
pub fn train_head(
    train: &[LabeledVideo],
    val: &[LabeledVideo],
    pooling: ScorePooling,
    config: &TrainConfig,
) -> Result<(RegressionHead, TrainingLog)> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Train("training and validation sets must be non-empty".into()));
    }
    let dim = train[0].0.first().map(|r| r.len()).ok_or_else(|| Error::Train("video with no feature rows".into()))?;
    for (rows, mos) in train.iter().chain(val) {
        if rows.is_empty() {
            return Err(Error::Train("video with no feature rows".into()));
        }
        if !mos.is_finite() {
            return Err(Error::Train("non-finite MOS label".into()));
        }
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len(), context: "feature row".into() });
            }
        }
    }

    let all_train_rows: Vec<Vec<f64>> = train.iter().flat_map(|(rows, _)| rows.iter().cloned()).collect();
    let standardization = Standardization::fit(&all_train_rows)?;
    let z_train = standardize_videos(train, &standardization);
    let z_val = standardize_videos(val, &standardization);

    // The projection starts at a small constant: correlation losses are
    // scale-invariant, and a nonzero start clears the zero-variance saddle.
    // The seeded generator only drives epoch shuffling.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = Parameters {
        weights: vec![0.05; dim],
        bias: 0.0,
        kernel: match &pooling {
            ScorePooling::SimpleAverage => None,
            ScorePooling::LearnedConv { weights } => Some(weights.clone()),
        },
    };

    let mut adam_m = vec![0.0; params.flat_len()];
    let mut adam_v = vec![0.0; params.flat_len()];
    let mut adam_t = 0u64;

    let mut best: Option<(f64, Parameters, usize, Option<f64>)> = None;
    let mut epoch_logs = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..z_train.len()).collect();

    for epoch in 1..=config.epochs {
        let decays = config.decay_epochs.iter().filter(|&&d| epoch > d).count() as i32;
        let lr = config.learning_rate / config.decay_factor.powi(decays);
        order.shuffle(&mut rng);

        let mut batch_losses = Vec::new();
        let mut degenerate_batches = 0usize;
        for batch in order.chunks(config.minibatch) {
            if config.loss.is_correlation() && batch.len() < 2 {
                continue; // trailing singleton: correlation undefined
            }
            let mut predictions = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            let mut frame_scores = Vec::with_capacity(batch.len());
            for &vi in batch {
                let (per_frame, video) = forward(&z_train[vi].0, &params);
                predictions.push(video);
                targets.push(z_train[vi].1);
                frame_scores.push(per_frame);
            }
            if targets.windows(2).all(|w| w[0] == w[1]) && config.loss.is_correlation() {
                continue; // all-tied targets in this batch: correlation undefined
            }
            let out = loss_value_and_gradient(&predictions, &targets, config.loss)?;
            if !out.value.is_finite() {
                return Err(Error::Train(format!("non-finite loss at epoch {epoch}")));
            }
            if out.degenerate {
                degenerate_batches += 1;
                log::warn!("epoch {epoch}: zero prediction variance in batch, loss pinned at 0.5");
            }
            batch_losses.push(out.value);

            let mut grad_weights = vec![0.0; dim];
            let mut grad_bias = 0.0;
            let mut grad_kernel = params.kernel.as_ref().map(|k| vec![0.0; k.len()]);
            for (bi, &vi) in batch.iter().enumerate() {
                backward(
                    &z_train[vi].0,
                    &frame_scores[bi],
                    out.gradient[bi],
                    &params,
                    &mut grad_weights,
                    &mut grad_bias,
                    &mut grad_kernel,
                );
            }

            // Adam step over the flattened parameter vector.
            adam_t += 1;
            let flat_grad: Vec<f64> = grad_weights
                .iter()
                .chain(std::iter::once(&grad_bias))
                .chain(grad_kernel.iter().flatten())
                .copied()
                .collect();
            let bias1 = 1.0 - ADAM_BETA1.powi(adam_t as i32);
            let bias2 = 1.0 - ADAM_BETA2.powi(adam_t as i32);
            let mut flat: Vec<f64> = params
                .weights
                .iter()
                .chain(std::iter::once(&params.bias))
                .chain(params.kernel.iter().flatten())
                .copied()
                .collect();
            for (i, g) in flat_grad.iter().enumerate() {
                adam_m[i] = ADAM_BETA1 * adam_m[i] + (1.0 - ADAM_BETA1) * g;
                adam_v[i] = ADAM_BETA2 * adam_v[i] + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = adam_m[i] / bias1;
                let v_hat = adam_v[i] / bias2;
                flat[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            }
            params.weights.copy_from_slice(&flat[..dim]);
            params.bias = flat[dim];
            if let Some(kernel) = params.kernel.as_mut() {
                kernel.copy_from_slice(&flat[dim + 1..]);
            }
        }

        let val_predictions = predict_all(&z_val, &params);
        let val_targets: Vec<f64> = z_val.iter().map(|(_, mos)| *mos).collect();
        let val_srcc = srcc(&val_predictions, &val_targets).ok();
        let score = val_srcc.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(s, ..)| score > *s) {
            best = Some((
                score,
                Parameters {
                    weights: params.weights.clone(),
                    bias: params.bias,
                    kernel: params.kernel.clone(),
                },
                epoch,
                val_srcc,
            ));
        }

        let mean_batch_loss = if batch_losses.is_empty() {
            f64::NAN
        } else {
            batch_losses.iter().sum::<f64>() / batch_losses.len() as f64
        };
        epoch_logs.push(EpochLog { epoch, learning_rate: lr, mean_batch_loss, val_srcc, degenerate_batches });
    }

    let (_, best_params, selected_epoch, selected_val_srcc) = best.expect("at least one epoch ran");
    let head = RegressionHead {
        weights: best_params.weights.clone(),
        bias: best_params.bias,
        pooling: best_params.pooling(),
        standardization,
        config_digest: String::new(),
        seed: config.seed,
    };
    let log = TrainingLog {
        loss: config.loss,
        seed: config.seed,
        epochs: epoch_logs,
        selected_epoch,
        selected_val_srcc,
    };
    Ok((head, log))
}
