//! Analytic toy analyzers.
//!
//! Closed-form, distortion-sensitive backends that let every pipeline
//! path run without model files. The spatial map pools to a 7-dim vector
//! `[mean luma, std luma, mean |Sobel|, high-frequency energy ratio,
//! mean R, mean G, mean B]`; the temporal map pools to a 3-dim vector
//! `[mean |frame diff|, flicker, jerkiness]`.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{FeatureMap, SpatialBackend, TemporalBackend};
use crate::frame::Frame;

pub const TOY_SPATIAL_ID: &str = "toy-spatial";
pub const TOY_TEMPORAL_ID: &str = "toy-temporal";
/// Dimensions of the pooled AVG vectors.
pub const TOY_SPATIAL_DIM: usize = 7;
pub const TOY_TEMPORAL_DIM: usize = 3;

fn digest_of(tag: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    out.copy_from_slice(&Sha256::digest(tag.as_bytes()));
    out
}

/// `|Sobel|` gradient magnitudes over the interior pixels of a luma plane.
/// Empty when the plane is smaller than 3x3.
pub fn sobel_magnitudes(luma: &[f64], w: usize, h: usize) -> Vec<f64> {
    if w < 3 || h < 3 {
        return Vec::new();
    }
    let at = |x: usize, y: usize| luma[y * w + x];
    let mut out = Vec::with_capacity((w - 2) * (h - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Energy of the detail left after a 3x3 box blur, relative to the total
/// centered energy. Scale-invariant; 0 for constant frames.
pub fn high_frequency_ratio(luma: &[f64], w: usize, h: usize) -> f64 {
    let clamp_w = |x: i64| x.clamp(0, w as i64 - 1) as usize;
    let clamp_h = |y: i64| y.clamp(0, h as i64 - 1) as usize;
    let mut detail_energy = 0.0;
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    acc += luma[clamp_h(y as i64 + dy) * w + clamp_w(x as i64 + dx)];
                }
            }
            let d = luma[y * w + x] - acc / 9.0;
            detail_energy += d * d;
        }
    }
    let m = mean(luma);
    let total: f64 = luma.iter().map(|v| (v - m) * (v - m)).sum();
    if total > 0.0 {
        detail_energy / total
    } else {
        0.0
    }
}

/// Spatial toy analyzer. Channels 0 and 4..6 carry per-pixel maps (luma
/// and RGB); channels 1..3 are constant maps holding whole-frame
/// statistics so that average pooling reads them out unchanged.
#[derive(Debug, Default, Clone, Copy)]
pub struct ToySpatialBackend;

impl SpatialBackend for ToySpatialBackend {
    fn id(&self) -> &str {
        TOY_SPATIAL_ID
    }

    fn weights_digest(&self) -> [u8; 32] {
        digest_of("toy-spatial-v1")
    }

    fn feature_map(&self, frame: &Frame) -> Result<FeatureMap> {
        let (w, h) = (frame.width(), frame.height());
        let n = w * h;
        let luma = frame.luma();
        let std_luma = population_std(&luma);
        let mean_sobel = mean(&sobel_magnitudes(&luma, w, h));
        let hf = high_frequency_ratio(&luma, w, h);

        let mut data = Vec::with_capacity(TOY_SPATIAL_DIM * n);
        data.extend_from_slice(&luma);
        data.extend(std::iter::repeat_n(std_luma, n));
        data.extend(std::iter::repeat_n(mean_sobel, n));
        data.extend(std::iter::repeat_n(hf, n));
        for c in 0..3 {
            data.extend(frame.plane(c).iter().map(|&p| p as f64));
        }
        FeatureMap::new(TOY_SPATIAL_DIM, n, data)
    }
}

/// Temporal toy analyzer over a chunk of frames sharing one size.
/// Channel 0 is the per-pixel absolute frame difference; channels 1 and 2
/// are constant maps with the flicker statistic (std over time of the
/// frame-mean luma) and the jerkiness proxy (mean absolute second
/// temporal difference).
#[derive(Debug, Default, Clone, Copy)]
pub struct ToyTemporalBackend;

impl TemporalBackend for ToyTemporalBackend {
    fn id(&self) -> &str {
        TOY_TEMPORAL_ID
    }

    fn weights_digest(&self) -> [u8; 32] {
        digest_of("toy-temporal-v1")
    }

    fn feature_map(&self, chunk: &[Frame]) -> Result<FeatureMap> {
        let first = chunk.first().ok_or_else(|| Error::Backend {
            backend: TOY_TEMPORAL_ID.into(),
            message: "empty chunk".into(),
        })?;
        let (w, h) = (first.width(), first.height());
        if chunk.iter().any(|f| f.width() != w || f.height() != h) {
            return Err(Error::Backend {
                backend: TOY_TEMPORAL_ID.into(),
                message: "chunk frames must share dimensions".into(),
            });
        }
        let n = w * h;
        let t = chunk.len();
        let lumas: Vec<Vec<f64>> = chunk.iter().map(|f| f.luma()).collect();

        // Positions cover the (T-1) difference planes; a single-frame chunk
        // degenerates to one all-zero plane.
        let planes = t.saturating_sub(1).max(1);
        let positions = planes * n;

        let mut diff_map = vec![0.0; positions];
        if t > 1 {
            for ti in 0..t - 1 {
                for i in 0..n {
                    diff_map[ti * n + i] = (lumas[ti + 1][i] - lumas[ti][i]).abs();
                }
            }
        }

        let frame_means: Vec<f64> = lumas.iter().map(|l| mean(l)).collect();
        let flicker = population_std(&frame_means);

        let jerkiness = if t >= 3 {
            let mut acc = 0.0;
            for ti in 1..t - 1 {
                for i in 0..n {
                    acc += (lumas[ti + 1][i] - 2.0 * lumas[ti][i] + lumas[ti - 1][i]).abs();
                }
            }
            acc / ((t - 2) * n) as f64
        } else {
            0.0
        };

        let mut data = Vec::with_capacity(TOY_TEMPORAL_DIM * positions);
        data.extend_from_slice(&diff_map);
        data.extend(std::iter::repeat_n(flicker, positions));
        data.extend(std::iter::repeat_n(jerkiness, positions));
        FeatureMap::new(TOY_TEMPORAL_DIM, positions, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{pool_average, pool_average_std, spatial_features, temporal_features, PoolingMode};

    #[test]
    fn constant_frame_pools_to_its_statistics() {
        let frame = Frame::constant(16, 12, [50, 100, 150]);
        let feat = spatial_features(&frame, &ToySpatialBackend, PoolingMode::Avg).unwrap();
        let luma = 0.299 * 50.0 + 0.587 * 100.0 + 0.114 * 150.0;
        assert!((feat.values[0] as f64 - luma).abs() < 1e-4);
        assert_eq!(feat.values[1], 0.0); // std
        assert_eq!(feat.values[2], 0.0); // sobel
        assert_eq!(feat.values[3], 0.0); // hf ratio
        assert_eq!(&feat.values[4..], &[50.0, 100.0, 150.0]);
        let avg_std = spatial_features(&frame, &ToySpatialBackend, PoolingMode::AvgStd).unwrap();
        assert_eq!(&avg_std.values[..7], feat.values.as_slice());
        assert!(avg_std.values[7..].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn blur_strictly_decreases_sharpness_coordinates() {
        use crate::ingest::{synthesize_video, DistortionKind, SyntheticSpec};
        let mk = |level: f64| SyntheticSpec {
            content_seed: 99,
            kind: DistortionKind::Blur,
            level,
            duration: 0.5,
            fps: 2.0,
            width: 48,
            height: 48,
        };
        let clean = &synthesize_video(&mk(0.0)).unwrap()[0];
        let blurred = &synthesize_video(&mk(0.8)).unwrap()[0];
        let f_clean = spatial_features(clean, &ToySpatialBackend, PoolingMode::Avg).unwrap().values;
        let f_blur = spatial_features(blurred, &ToySpatialBackend, PoolingMode::Avg).unwrap().values;
        assert!(f_blur[2] < f_clean[2], "mean |Sobel| should drop: {} vs {}", f_blur[2], f_clean[2]);
        assert!(f_blur[3] < f_clean[3], "HF ratio should drop: {} vs {}", f_blur[3], f_clean[3]);
    }

    #[test]
    fn identical_frames_have_zero_flicker() {
        let chunk = vec![Frame::constant(8, 8, [100, 100, 100]); 6];
        let feat = temporal_features(&chunk, &ToyTemporalBackend).unwrap();
        assert_eq!(feat.values, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn alternating_luminance_flicker_is_proportional_to_delta() {
        let base = 100.0f64;
        let flicker_of = |delta: f64| {
            let chunk: Vec<Frame> = (0..8)
                .map(|t| {
                    let v = (base + if t % 2 == 0 { delta } else { -delta }).round() as u8;
                    Frame::constant(8, 8, [v, v, v])
                })
                .collect();
            temporal_features(&chunk, &ToyTemporalBackend).unwrap().values[1] as f64
        };
        let f1 = flicker_of(10.0);
        let f2 = flicker_of(20.0);
        assert!(f1 > 0.0);
        assert!((f2 / f1 - 2.0).abs() < 1e-3, "flicker should scale linearly: {f1} vs {f2}");
    }

    #[test]
    fn single_frame_chunk_is_all_zero() {
        let chunk = vec![Frame::from_fn(8, 8, |c, x, y| ((c * 17 + x * 3 + y) % 240) as u8)];
        let feat = temporal_features(&chunk, &ToyTemporalBackend).unwrap();
        assert_eq!(feat.values[0], 0.0);
        assert_eq!(feat.values[1], 0.0);
        assert_eq!(feat.values[2], 0.0);
    }

    #[test]
    fn toy_maps_expose_avg_std_consistency() {
        let frame = Frame::from_fn(20, 20, |c, x, y| ((x * 7 + y * 13 + c * 31) % 251) as u8);
        let map = ToySpatialBackend.feature_map(&frame).unwrap();
        let avg = pool_average(&map);
        let avg_std = pool_average_std(&map);
        assert_eq!(&avg_std[..avg.len()], avg.as_slice());
        // Luma and RGB channels are genuine maps with nonzero spread.
        assert!(avg_std[avg.len()] > 0.0);
    }
}
