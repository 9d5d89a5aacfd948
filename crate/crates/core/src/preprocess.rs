//! Video preprocessor: temporal key-frame selection, aspect-preserving
//! spatial downsampling, video-chunk extraction, and chunk broadcasting.
//!
//! A video with `N` frames at `R` fps is reduced to `K = max(1, floor(N*R_a/R))`
//! key frames taken at `floor(R/R_a * (0.5 + i))`. Each key frame can own a
//! `T`-frame chunk sampled at frame interval `tau`, centered on the key frame.
//! When the chunk rate `R_b` is below the key-frame rate `R_a`, chunks are
//! computed only for a subsequence of key frames and broadcast to the rest.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::ingest::VideoAsset;

/// Sampling knobs for the preprocessor.
///
/// Defaults follow the reference configuration: key frames at 1 fps with
/// shorter side 448, chunks of 32 frames at 0.5 fps resized to 224x224.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Key-frame rate `R_a` in fps.
    pub key_frame_rate: f64,
    /// Chunk rate `R_b` in fps; must not exceed `key_frame_rate`.
    pub chunk_rate: f64,
    /// Shorter-side length `L_s` of key frames, in pixels.
    pub key_frame_short_side: usize,
    /// Square chunk resolution `L_t`, in pixels; must be below `L_s`.
    pub chunk_size: usize,
    /// Frames per chunk `T`.
    pub chunk_frames: usize,
    /// Chunk frame interval `tau`, in source frames.
    pub chunk_interval: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            key_frame_rate: 1.0,
            chunk_rate: 0.5,
            key_frame_short_side: 448,
            chunk_size: 224,
            chunk_frames: 32,
            chunk_interval: 1,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.key_frame_rate > 0.0) || !(self.chunk_rate > 0.0) {
            return Err(Error::Config("sampling rates must be positive".into()));
        }
        if self.chunk_rate > self.key_frame_rate {
            return Err(Error::Config(format!(
                "chunk_rate {} exceeds key_frame_rate {}",
                self.chunk_rate, self.key_frame_rate
            )));
        }
        if self.key_frame_short_side == 0 || self.chunk_size == 0 || self.chunk_frames == 0 || self.chunk_interval == 0
        {
            return Err(Error::Config("sizes and counts must be positive".into()));
        }
        if self.chunk_size >= self.key_frame_short_side {
            return Err(Error::Config(format!(
                "chunk_size {} must be below key_frame_short_side {}",
                self.chunk_size, self.key_frame_short_side
            )));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form; keys feature-cache entries.
    pub fn digest(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("config serializes");
        let mut out = [0u8; 32];
        out.copy_from_slice(&Sha256::digest(&json));
        out
    }
}

/// A selected key frame after spatial downsampling.
#[derive(Debug, Clone)]
pub struct KeyFrame {
    /// Position in the key-frame sequence.
    pub index: usize,
    /// Source frame index in the raw video.
    pub source_frame_index: usize,
    /// Downsampled image, shorter side `L_s` (or the original when already smaller).
    pub image: Frame,
}

/// Chunk assignment for one key frame: either computed or broadcast.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkPlan {
    /// Owner key-frame index.
    pub key_index: usize,
    /// When set, this key frame reuses the chunk of the given key frame.
    pub broadcast_from: Option<usize>,
}

/// A materialized video chunk: `T` frames at `L_t x L_t`.
#[derive(Debug, Clone)]
pub struct VideoChunk {
    /// Owner key-frame index.
    pub key_index: usize,
    /// Source frame indices, length `T`.
    pub frame_indices: Vec<usize>,
    /// When set, `frames` is bit-identical to the source chunk's frames.
    pub broadcast_from: Option<usize>,
    pub frames: Vec<Frame>,
}

/// Output of the full preprocessing stage for one video.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub key_frames: Vec<KeyFrame>,
    /// One chunk per key frame, in key-frame order; empty when chunks are disabled.
    pub chunks: Vec<VideoChunk>,
}

/// Source indices of the key frames of an `n_frames`-at-`fps` video
/// sampled down to `key_rate` fps.
///
/// Returns `floor(fps/key_rate * (0.5 + i))` for `i = 0..K` with
/// `K = max(1, floor(n_frames*key_rate/fps))`, every index clamped into
/// `[0, n_frames-1]`.
pub fn select_key_frame_indices(n_frames: usize, fps: f64, key_rate: f64) -> Vec<usize> {
    debug_assert!(fps > 0.0 && key_rate > 0.0);
    if n_frames == 0 {
        return Vec::new();
    }
    let k = ((n_frames as f64 * key_rate / fps).floor() as usize).max(1);
    let stride = fps / key_rate;
    (0..k)
        .map(|i| {
            let raw = (stride * (0.5 + i as f64)).floor();
            if raw < 0.0 {
                0
            } else {
                (raw as usize).min(n_frames - 1)
            }
        })
        .collect()
}

/// Source indices of the `chunk_frames`-long chunk centered on source frame
/// `center`: position `j` maps to `clamp(center + tau*(j - floor(T/2)), 0, n_frames-1)`.
pub fn extract_chunk_indices(center: usize, n_frames: usize, chunk_frames: usize, interval: usize) -> Vec<usize> {
    debug_assert!(n_frames > 0 && chunk_frames > 0 && interval > 0);
    let half = (chunk_frames / 2) as i64;
    let max = n_frames as i64 - 1;
    (0..chunk_frames as i64)
        .map(|j| {
            let idx = center as i64 + interval as i64 * (j - half);
            idx.clamp(0, max) as usize
        })
        .collect()
}

/// Assigns each of `key_count` key frames either a computed chunk or a
/// broadcast source.
///
/// Chunks are computed for key frames `i` where `floor(i*chunk_rate/key_rate)`
/// takes a new value (always including `i = 0`); every other key frame
/// broadcasts from the nearest computed one, ties resolved toward the earlier.
pub fn plan_chunks(key_count: usize, key_rate: f64, chunk_rate: f64) -> Result<Vec<ChunkPlan>> {
    if !(key_rate > 0.0) || !(chunk_rate > 0.0) {
        return Err(Error::Config("sampling rates must be positive".into()));
    }
    if chunk_rate > key_rate {
        return Err(Error::Config(format!(
            "chunk_rate {chunk_rate} exceeds key_rate {key_rate}"
        )));
    }
    let ratio = chunk_rate / key_rate;
    let mut computed: Vec<usize> = Vec::new();
    let mut last_bucket = None;
    for i in 0..key_count {
        let bucket = (i as f64 * ratio).floor() as i64;
        if last_bucket != Some(bucket) {
            computed.push(i);
            last_bucket = Some(bucket);
        }
    }
    let plans = (0..key_count)
        .map(|i| {
            if computed.binary_search(&i).is_ok() {
                ChunkPlan { key_index: i, broadcast_from: None }
            } else {
                let nearest = computed
                    .iter()
                    .copied()
                    .min_by_key(|&c| (c.abs_diff(i), c))
                    .expect("key 0 is always computed");
                ChunkPlan { key_index: i, broadcast_from: Some(nearest) }
            }
        })
        .collect();
    Ok(plans)
}

/// Bilinear resample to an arbitrary size, half-pixel-centered sampling,
/// 8-bit quantization by rounding half away from zero.
pub fn resize_bilinear(frame: &Frame, out_w: usize, out_h: usize) -> Frame {
    debug_assert!(out_w > 0 && out_h > 0);
    let (w, h) = (frame.width(), frame.height());
    let x_scale = w as f64 / out_w as f64;
    let y_scale = h as f64 / out_h as f64;

    // Precompute per-axis neighbor indices and weights.
    let x_taps: Vec<(usize, usize, f64)> = (0..out_w)
        .map(|xo| {
            let sx = (xo as f64 + 0.5) * x_scale - 0.5;
            let x0 = sx.floor();
            let fx = sx - x0;
            let i0 = (x0.max(0.0) as usize).min(w - 1);
            let i1 = ((x0 + 1.0).max(0.0) as usize).min(w - 1);
            (i0, i1, fx)
        })
        .collect();
    let y_taps: Vec<(usize, usize, f64)> = (0..out_h)
        .map(|yo| {
            let sy = (yo as f64 + 0.5) * y_scale - 0.5;
            let y0 = sy.floor();
            let fy = sy - y0;
            let j0 = (y0.max(0.0) as usize).min(h - 1);
            let j1 = ((y0 + 1.0).max(0.0) as usize).min(h - 1);
            (j0, j1, fy)
        })
        .collect();

    let mut data = Vec::with_capacity(out_w * out_h * 3);
    for c in 0..3 {
        let plane = frame.plane(c);
        for &(j0, j1, fy) in &y_taps {
            let row0 = &plane[j0 * w..j0 * w + w];
            let row1 = &plane[j1 * w..j1 * w + w];
            for &(i0, i1, fx) in &x_taps {
                let top = row0[i0] as f64 * (1.0 - fx) + row0[i1] as f64 * fx;
                let bot = row1[i0] as f64 * (1.0 - fx) + row1[i1] as f64 * fx;
                let v = top * (1.0 - fy) + bot * fy;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Frame::new(out_w, out_h, data).expect("computed dimensions are valid")
}

/// Aspect-preserving bilinear downsample so the shorter side equals
/// `short_side`. Frames whose shorter side is already `<= short_side`
/// are returned unchanged (the preprocessor never upsamples).
pub fn spatial_downsample(frame: &Frame, short_side: usize) -> Frame {
    debug_assert!(short_side > 0);
    let (w, h) = (frame.width(), frame.height());
    if frame.short_side() <= short_side {
        return frame.clone();
    }
    let (out_w, out_h) = if h <= w {
        let out_w = ((w as f64 * short_side as f64 / h as f64).round() as usize).max(1);
        (out_w, short_side)
    } else {
        let out_h = ((h as f64 * short_side as f64 / w as f64).round() as usize).max(1);
        (short_side, out_h)
    };
    resize_bilinear(frame, out_w, out_h)
}

/// Resizes every chunk frame to `chunk_size x chunk_size` (square target;
/// aspect ratio intentionally not preserved).
pub fn resize_chunk(frames: &[Frame], chunk_size: usize) -> Vec<Frame> {
    frames.iter().map(|f| resize_bilinear(f, chunk_size, chunk_size)).collect()
}

/// Runs the whole preprocessing stage on one video.
///
/// `with_chunks` controls whether video chunks are materialized (they are
/// only needed when a temporal analyzer is in play). Output is a pure
/// function of `(asset, config)`.
pub fn preprocess_video(asset: &VideoAsset, config: &PreprocessConfig, with_chunks: bool) -> Result<Preprocessed> {
    config.validate()?;
    let n = asset.frame_count();
    let sources = select_key_frame_indices(n, asset.frame_rate(), config.key_frame_rate);
    let key_frames: Vec<KeyFrame> = sources
        .iter()
        .enumerate()
        .map(|(i, &src)| KeyFrame {
            index: i,
            source_frame_index: src,
            image: spatial_downsample(asset.frame(src), config.key_frame_short_side),
        })
        .collect();

    let mut chunks = Vec::new();
    if with_chunks {
        let plans = plan_chunks(key_frames.len(), config.key_frame_rate, config.chunk_rate)?;
        // Materialize computed chunks first, then clone tensors for broadcast ones.
        let mut computed: Vec<Option<VideoChunk>> = vec![None; key_frames.len()];
        for plan in &plans {
            if plan.broadcast_from.is_none() {
                let center = key_frames[plan.key_index].source_frame_index;
                let indices = extract_chunk_indices(center, n, config.chunk_frames, config.chunk_interval);
                let frames: Vec<Frame> = indices.iter().map(|&i| asset.frame(i).clone()).collect();
                computed[plan.key_index] = Some(VideoChunk {
                    key_index: plan.key_index,
                    frame_indices: indices,
                    broadcast_from: None,
                    frames: resize_chunk(&frames, config.chunk_size),
                });
            }
        }
        for plan in &plans {
            let chunk = match plan.broadcast_from {
                None => computed[plan.key_index].clone().expect("materialized above"),
                Some(src) => {
                    let source = computed[src].as_ref().expect("broadcast source is computed");
                    VideoChunk {
                        key_index: plan.key_index,
                        frame_indices: source.frame_indices.clone(),
                        broadcast_from: Some(src),
                        frames: source.frames.clone(),
                    }
                }
            };
            chunks.push(chunk);
        }
    }

    Ok(Preprocessed { key_frames, chunks })
}
