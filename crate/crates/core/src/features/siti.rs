//! Spatial information (SI) and temporal information (TI) descriptors.
//!
//! Per frame, SI is the population standard deviation of the Sobel
//! gradient magnitude of the Rec. 601 luma plane (interior pixels);
//! per successive frame pair, TI is the population standard deviation of
//! the pixel-wise luma difference. The video-level descriptor takes the
//! maximum over frames, with the per-frame series retained so other
//! aggregates can be reported.

use serde::{Deserialize, Serialize};

use crate::features::toy::sobel_magnitudes;
use crate::ingest::VideoAsset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiTiDescriptor {
    /// `max` over the per-frame SI series.
    pub si: f64,
    /// `max` over the per-pair TI series; 0 for single-frame videos.
    pub ti: f64,
    pub si_series: Vec<f64>,
    pub ti_series: Vec<f64>,
}

/// Streaming population standard deviation (Welford's update, which keeps
/// its accuracy even when the spread is tiny next to the mean).
fn std_streaming(values: impl Iterator<Item = f64>) -> f64 {
    let mut n = 0u64;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for v in values {
        n += 1;
        let d = v - mean;
        mean += d / n as f64;
        m2 += d * (v - mean);
    }
    if n == 0 {
        return 0.0;
    }
    (m2 / n as f64).max(0.0).sqrt()
}

/// Computes the SI/TI descriptor of a decoded video.
pub fn compute_siti(asset: &VideoAsset) -> SiTiDescriptor {
    let lumas: Vec<Vec<f64>> = asset.frames().iter().map(|f| f.luma()).collect();
    let (w, h) = (asset.width(), asset.height());

    let si_series: Vec<f64> = lumas
        .iter()
        .map(|luma| std_streaming(sobel_magnitudes(luma, w, h).into_iter()))
        .collect();
    let ti_series: Vec<f64> = lumas
        .windows(2)
        .map(|pair| std_streaming(pair[1].iter().zip(&pair[0]).map(|(a, b)| a - b)))
        .collect();

    let max = |series: &[f64]| series.iter().cloned().fold(0.0f64, f64::max);
    SiTiDescriptor { si: max(&si_series), ti: max(&ti_series), si_series, ti_series }
}
