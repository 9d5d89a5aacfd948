//! Spatial and temporal quality analyzers behind a pluggable backend
//! interface, feature pooling, SI/TI dataset descriptors, and the
//! persistent feature cache.
//!
//! A backend exposes the last-stage feature map of its network (or an
//! analytic stand-in); this module pools maps into fixed-length vectors.
//! Backends are frozen: no parameter ever changes during a run, which
//! `weights_digest` makes checkable.

pub mod cache;
#[cfg(feature = "onnx")]
pub mod onnx;
pub mod siti;
pub mod toy;

pub use cache::{FeatureCache, FeatureRecord};
pub use siti::{compute_siti, SiTiDescriptor};
pub use toy::{ToySpatialBackend, ToyTemporalBackend};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::ingest::VideoAsset;
use crate::preprocess::{preprocess_video, PreprocessConfig};

/// Pooling applied to the spatial last-stage feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PoolingMode {
    /// Channel-wise mean over spatial positions.
    #[default]
    Avg,
    /// Channel-wise mean concatenated with channel-wise population
    /// standard deviation; twice the AVG dimension.
    AvgStd,
}

impl PoolingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PoolingMode::Avg => "avg",
            PoolingMode::AvgStd => "avg_std",
        }
    }
}

/// A dense last-stage feature map: `channels` slices of `positions` values.
///
/// `positions` is `h*w` for spatial maps and `t*h*w` for temporal ones;
/// pooling only ever reduces over positions, so the distinction stays with
/// the backend.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub positions: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, positions: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || positions == 0 || data.len() != channels * positions {
            return Err(Error::InvalidInput(format!(
                "feature map {}x{} != data length {}",
                channels,
                positions,
                data.len()
            )));
        }
        Ok(Self { channels, positions, data })
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.positions..(c + 1) * self.positions]
    }
}

/// Channel-wise mean over positions.
pub fn pool_average(map: &FeatureMap) -> Vec<f32> {
    (0..map.channels)
        .map(|c| {
            let ch = map.channel(c);
            (ch.iter().sum::<f64>() / ch.len() as f64) as f32
        })
        .collect()
}

/// Channel-wise mean followed by channel-wise population standard
/// deviation: `[means..., stds...]`.
pub fn pool_average_std(map: &FeatureMap) -> Vec<f32> {
    let mut means = Vec::with_capacity(map.channels);
    let mut stds = Vec::with_capacity(map.channels);
    for c in 0..map.channels {
        let ch = map.channel(c);
        let n = ch.len() as f64;
        let mean = ch.iter().sum::<f64>() / n;
        let var = ch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        means.push(mean as f32);
        stds.push(var.sqrt() as f32);
    }
    means.extend_from_slice(&stds);
    means
}

/// Spatial quality analyzer: key frame in, last-stage feature map out.
/// Implementations are frozen for the lifetime of a run.
pub trait SpatialBackend: Send + Sync {
    fn id(&self) -> &str;
    /// Digest of the analyzer parameters; constant on frozen backends.
    fn weights_digest(&self) -> [u8; 32];
    fn feature_map(&self, frame: &Frame) -> Result<FeatureMap>;
}

/// Temporal quality analyzer: `T`-frame chunk in, last-stage map out.
pub trait TemporalBackend: Send + Sync {
    fn id(&self) -> &str;
    fn weights_digest(&self) -> [u8; 32];
    fn feature_map(&self, chunk: &[Frame]) -> Result<FeatureMap>;
}

/// Quality-aware spatial feature vector for one key frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialFeature {
    pub values: Vec<f32>,
    pub backend_id: String,
    pub pooling: PoolingMode,
}

/// Temporal feature vector for one video chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalFeature {
    pub values: Vec<f32>,
    pub backend_id: String,
}

/// Pools the backend's last-stage map for one key frame.
pub fn spatial_features(frame: &Frame, backend: &dyn SpatialBackend, pooling: PoolingMode) -> Result<SpatialFeature> {
    let map = backend.feature_map(frame)?;
    let values = match pooling {
        PoolingMode::Avg => pool_average(&map),
        PoolingMode::AvgStd => pool_average_std(&map),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Backend { backend: backend.id().into(), message: "non-finite spatial feature".into() });
    }
    Ok(SpatialFeature { values, backend_id: backend.id().to_string(), pooling })
}

/// Global average pooling of the temporal backend's last-stage map.
pub fn temporal_features(chunk: &[Frame], backend: &dyn TemporalBackend) -> Result<TemporalFeature> {
    let map = backend.feature_map(chunk)?;
    let values = pool_average(&map);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Backend { backend: backend.id().into(), message: "non-finite temporal feature".into() });
    }
    Ok(TemporalFeature { values, backend_id: backend.id().to_string() })
}

/// Composite analyzer identity used to key cache entries: the spatial
/// backend id, optionally joined with the temporal backend id.
pub fn analyzer_id(spatial_id: &str, temporal_id: Option<&str>) -> String {
    match temporal_id {
        None => spatial_id.to_string(),
        Some(t) => format!("{spatial_id}+{t}"),
    }
}

/// Runs preprocessing and both analyzers over one video.
///
/// Temporal features are computed once per computed chunk and copied
/// bit-identically onto key frames whose chunks are broadcast.
pub fn extract_video_features(
    asset: &VideoAsset,
    config: &PreprocessConfig,
    spatial: &dyn SpatialBackend,
    pooling: PoolingMode,
    temporal: Option<&dyn TemporalBackend>,
) -> Result<Vec<FeatureRecord>> {
    let pre = preprocess_video(asset, config, temporal.is_some())?;
    let mut records: Vec<FeatureRecord> = pre
        .key_frames
        .iter()
        .map(|kf| {
            spatial_features(&kf.image, spatial, pooling).map(|sf| FeatureRecord { spatial: sf.values, temporal: None })
        })
        .collect::<Result<_>>()?;

    if let Some(backend) = temporal {
        let mut computed: Vec<Option<Vec<f32>>> = vec![None; pre.chunks.len()];
        for chunk in &pre.chunks {
            if chunk.broadcast_from.is_none() {
                computed[chunk.key_index] = Some(temporal_features(&chunk.frames, backend)?.values);
            }
        }
        for chunk in &pre.chunks {
            let values = match chunk.broadcast_from {
                None => computed[chunk.key_index].clone().expect("computed above"),
                Some(src) => computed[src].clone().expect("broadcast source computed"),
            };
            records[chunk.key_index].temporal = Some(values);
        }
    }
    Ok(records)
}

/// Analyzer backend selection, as it appears in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendSpec {
    pub kind: BackendKind,
    /// Exported-graph model file (ONNX); required for that kind.
    pub model: Option<PathBuf>,
    /// Square input size the exported graph expects; frames are center
    /// cropped to it when larger.
    pub input_size: Option<usize>,
    /// Per-channel normalization applied after scaling samples to [0, 1].
    pub normalization_mean: [f64; 3],
    pub normalization_std: [f64; 3],
    /// Graph input/output tensor names; defaults to the graph's single
    /// input and final output.
    pub input_name: Option<String>,
    pub output_name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    AnalyticToy,
    ExportedGraph,
}

impl Default for BackendSpec {
    fn default() -> Self {
        Self {
            kind: BackendKind::AnalyticToy,
            model: None,
            input_size: None,
            normalization_mean: [0.485, 0.456, 0.406],
            normalization_std: [0.229, 0.224, 0.225],
            input_name: None,
            output_name: None,
        }
    }
}

impl BackendSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kind == BackendKind::ExportedGraph {
            match &self.model {
                None => return Err(Error::Config("exported-graph backend needs a model path".into())),
                Some(p) if !p.exists() => {
                    return Err(Error::Config(format!("model file {} does not exist", p.display())))
                }
                _ => {}
            }
            if self.normalization_std.iter().any(|&s| !(s > 0.0)) {
                return Err(Error::Config("normalization std must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Instantiates the spatial analyzer described by `spec`.
pub fn build_spatial_backend(spec: &BackendSpec) -> Result<Box<dyn SpatialBackend>> {
    spec.validate()?;
    match spec.kind {
        BackendKind::AnalyticToy => Ok(Box::new(ToySpatialBackend)),
        #[cfg(feature = "onnx")]
        BackendKind::ExportedGraph => Ok(Box::new(onnx::ExportedSpatialBackend::load(spec)?)),
        #[cfg(not(feature = "onnx"))]
        BackendKind::ExportedGraph => Err(Error::Backend {
            backend: "exported-graph".into(),
            message: "this build has no ONNX support; rebuild with `--features onnx`".into(),
        }),
    }
}

/// Instantiates the temporal analyzer described by `spec`.
pub fn build_temporal_backend(spec: &BackendSpec) -> Result<Box<dyn TemporalBackend>> {
    spec.validate()?;
    match spec.kind {
        BackendKind::AnalyticToy => Ok(Box::new(ToyTemporalBackend)),
        #[cfg(feature = "onnx")]
        BackendKind::ExportedGraph => Ok(Box::new(onnx::ExportedTemporalBackend::load(spec)?)),
        #[cfg(not(feature = "onnx"))]
        BackendKind::ExportedGraph => Err(Error::Backend {
            backend: "exported-graph".into(),
            message: "this build has no ONNX support; rebuild with `--features onnx`".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn avg_and_std_pooling_hand_example() {
        // Two channels of a 2x2 map: {1,3,1,3} and {2,2,2,2}.
        let map = FeatureMap::new(2, 4, vec![1.0, 3.0, 1.0, 3.0, 2.0, 2.0, 2.0, 2.0]).unwrap();
        assert_eq!(pool_average(&map), vec![2.0, 2.0]);
        assert_eq!(pool_average_std(&map), vec![2.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn avg_std_first_half_equals_avg() {
        let data: Vec<f64> = (0..24).map(|i| (i as f64).sin() * 5.0).collect();
        let map = FeatureMap::new(4, 6, data).unwrap();
        let avg = pool_average(&map);
        let avg_std = pool_average_std(&map);
        assert_eq!(&avg_std[..4], avg.as_slice());
        assert_eq!(avg_std.len(), 8);
    }

    #[test]
    fn pooling_is_linear_in_the_map() {
        let data: Vec<f64> = (0..30).map(|i| i as f64 * 0.37 - 4.0).collect();
        let map = FeatureMap::new(3, 10, data.clone()).unwrap();
        let scaled = FeatureMap::new(3, 10, data.iter().map(|v| v * 2.5).collect()).unwrap();
        let base = pool_average(&map);
        let double = pool_average(&scaled);
        for (b, d) in base.iter().zip(&double) {
            assert!((d - 2.5 * b).abs() < 1e-6);
        }
    }

    #[test]
    fn composite_analyzer_id() {
        assert_eq!(analyzer_id("toy-spatial", None), "toy-spatial");
        assert_eq!(analyzer_id("toy-spatial", Some("toy-temporal")), "toy-spatial+toy-temporal");
    }
}
