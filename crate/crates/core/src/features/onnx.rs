//! Exported-graph analyzer backends (ONNX inference via tract).
//!
//! Spatial graphs take one normalized NCHW frame `[1, 3, S, S]`; temporal
//! graphs take one normalized NCTHW chunk `[1, 3, T, S, S]`. The graph
//! output must be the last-stage feature map: `[1, C, h, w]` (spatial),
//! `[1, C, t, h, w]` (temporal), or an already-pooled `[1, C]`, which this
//! module treats as a map with a single position. Inputs are scaled to
//! `[0, 1]` and normalized per channel before inference.

use std::path::Path;

use sha2::{Digest, Sha256};
use tract_onnx::prelude::*;

use crate::error::{Error, Result};
use crate::features::{BackendSpec, FeatureMap, SpatialBackend, TemporalBackend};
use crate::frame::Frame;

type RunnableOnnx = Arc<TypedRunnableModel>;

fn backend_err(backend: &str, message: impl Into<String>) -> Error {
    Error::Backend { backend: backend.into(), message: message.into() }
}

fn file_digest(path: &Path) -> Result<[u8; 32]> {
    let bytes = std::fs::read(path)?;
    let mut out = [0u8; 32];
    out.copy_from_slice(&Sha256::digest(&bytes));
    Ok(out)
}

fn load_runnable(spec: &BackendSpec, id: &str, input_shape: Option<Vec<usize>>) -> Result<RunnableOnnx> {
    let path = spec.model.as_ref().expect("validated");
    let mut model = tract_onnx::onnx()
        .model_for_path(path)
        .map_err(|e| backend_err(id, format!("load {}: {e}", path.display())))?;
    if let Some(name) = &spec.input_name {
        model = model
            .with_input_names([name.as_str()])
            .map_err(|e| backend_err(id, format!("input `{name}`: {e}")))?;
    }
    if let Some(name) = &spec.output_name {
        model = model
            .with_outputs_by_name([name.as_str()])
            .map_err(|e| backend_err(id, format!("output `{name}`: {e}")))?;
    }
    if let Some(shape) = input_shape {
        model = model
            .with_input_fact(0, f32::fact(shape).into())
            .map_err(|e| backend_err(id, format!("input fact: {e}")))?;
    }
    model
        .into_optimized()
        .map_err(|e| backend_err(id, format!("optimize: {e}")))?
        .into_runnable()
        .map_err(|e| backend_err(id, format!("plan: {e}")))
}

/// Normalized CHW samples of one frame, optionally center-cropped first.
fn normalized_chw(frame: &Frame, spec: &BackendSpec, id: &str) -> Result<(Vec<f32>, usize, usize)> {
    let frame = match spec.input_size {
        Some(s) => {
            if frame.width() < s || frame.height() < s {
                return Err(backend_err(
                    id,
                    format!("frame {}x{} smaller than input size {s}", frame.width(), frame.height()),
                ));
            }
            frame.crop_center(s, s)
        }
        None => frame.clone(),
    };
    let (w, h) = (frame.width(), frame.height());
    let mut data = Vec::with_capacity(3 * w * h);
    for c in 0..3 {
        let mean = spec.normalization_mean[c];
        let std = spec.normalization_std[c];
        data.extend(frame.plane(c).iter().map(|&p| ((p as f64 / 255.0 - mean) / std) as f32));
    }
    Ok((data, w, h))
}

fn map_from_output(output: &Tensor, id: &str) -> Result<FeatureMap> {
    let view = output
        .to_plain_array_view::<f32>()
        .map_err(|e| backend_err(id, format!("output tensor: {e}")))?;
    let shape = view.shape().to_vec();
    if shape.is_empty() || shape[0] != 1 {
        return Err(backend_err(id, format!("expected batch-1 output, got shape {shape:?}")));
    }
    let channels = if shape.len() >= 2 { shape[1] } else { 1 };
    let positions: usize = shape[2..].iter().product::<usize>().max(1);
    let data: Vec<f64> = view.iter().map(|&v| v as f64).collect();
    FeatureMap::new(channels, positions, data)
}

/// Frozen spatial analyzer backed by an exported ONNX graph.
pub struct ExportedSpatialBackend {
    id: String,
    digest: [u8; 32],
    spec: BackendSpec,
    model: RunnableOnnx,
}

impl ExportedSpatialBackend {
    pub fn load(spec: &BackendSpec) -> Result<Self> {
        let path = spec.model.as_ref().ok_or_else(|| Error::Config("exported-graph backend needs a model path".into()))?;
        let stem = path.file_stem().map_or("model".into(), |s| s.to_string_lossy().to_string());
        let id = format!("onnx-spatial:{stem}");
        let shape = spec.input_size.map(|s| vec![1, 3, s, s]);
        let model = load_runnable(spec, &id, shape)?;
        Ok(Self { id, digest: file_digest(path)?, spec: spec.clone(), model })
    }
}

impl SpatialBackend for ExportedSpatialBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn weights_digest(&self) -> [u8; 32] {
        self.digest
    }

    fn feature_map(&self, frame: &Frame) -> Result<FeatureMap> {
        let (data, w, h) = normalized_chw(frame, &self.spec, &self.id)?;
        let input = tract_ndarray::Array4::from_shape_vec((1, 3, h, w), data)
            .map_err(|e| backend_err(&self.id, format!("input tensor: {e}")))?;
        let outputs = self
            .model
            .run(tvec!(Tensor::from(input).into()))
            .map_err(|e| backend_err(&self.id, format!("inference: {e}")))?;
        map_from_output(&outputs[0], &self.id)
    }
}

/// Frozen temporal analyzer backed by an exported ONNX graph.
pub struct ExportedTemporalBackend {
    id: String,
    digest: [u8; 32],
    spec: BackendSpec,
    model: RunnableOnnx,
}

impl ExportedTemporalBackend {
    pub fn load(spec: &BackendSpec) -> Result<Self> {
        let path = spec.model.as_ref().ok_or_else(|| Error::Config("exported-graph backend needs a model path".into()))?;
        let stem = path.file_stem().map_or("model".into(), |s| s.to_string_lossy().to_string());
        let id = format!("onnx-temporal:{stem}");
        // Chunk length is only known at run time, so input facts are left
        // to the graph's own declarations here.
        let model = load_runnable(spec, &id, None)?;
        Ok(Self { id, digest: file_digest(path)?, spec: spec.clone(), model })
    }
}

impl TemporalBackend for ExportedTemporalBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn weights_digest(&self) -> [u8; 32] {
        self.digest
    }

    fn feature_map(&self, chunk: &[Frame]) -> Result<FeatureMap> {
        let first = chunk.first().ok_or_else(|| backend_err(&self.id, "empty chunk"))?;
        let (w, h) = (first.width(), first.height());
        if let Some(s) = self.spec.input_size {
            if w != s || h != s {
                return Err(backend_err(&self.id, format!("chunk frames are {w}x{h}, graph expects {s}x{s}")));
            }
        }
        let t = chunk.len();
        let mut data = vec![0.0f32; 3 * t * h * w];
        for (ti, frame) in chunk.iter().enumerate() {
            if frame.width() != w || frame.height() != h {
                return Err(backend_err(&self.id, "chunk frames must share dimensions"));
            }
            for c in 0..3 {
                let mean = self.spec.normalization_mean[c];
                let std = self.spec.normalization_std[c];
                let plane = frame.plane(c);
                let base = c * t * h * w + ti * h * w;
                for (i, &p) in plane.iter().enumerate() {
                    data[base + i] = ((p as f64 / 255.0 - mean) / std) as f32;
                }
            }
        }
        let input = tract_ndarray::Array5::from_shape_vec((1, 3, t, h, w), data)
            .map_err(|e| backend_err(&self.id, format!("input tensor: {e}")))?;
        let outputs = self
            .model
            .run(tvec!(Tensor::from(input).into()))
            .map_err(|e| backend_err(&self.id, format!("inference: {e}")))?;
        map_from_output(&outputs[0], &self.id)
    }
}
