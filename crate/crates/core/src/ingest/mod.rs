//! Dataset ingestion: manifests, video decoding, synthetic corpora.
//!
//! A dataset is a delimited-text manifest naming videos and their MOS
//! labels. Decoding is delegated to a pluggable [`VideoDecoder`]; the
//! built-in decoder reads the uncompressed container written by the
//! synthetic generator (see [`container`]). Frames are always delivered
//! as planar 8-bit RGB regardless of the source format.

pub mod container;
pub mod manifest;
pub mod synth;

pub use container::{RawContainerDecoder, CONTAINER_EXTENSION};
pub use manifest::{load_manifest, resolve_entry_path, write_manifest, ManifestEntry};
pub use synth::{generate_synthetic_dataset, synthesize_video, synthetic_mos, DistortionKind, SyntheticSpec};

use std::path::Path;

use crate::error::Result;
use crate::frame::Frame;

/// A fully decoded video.
#[derive(Debug, Clone)]
pub struct DecodedVideo {
    pub width: usize,
    pub height: usize,
    pub frame_rate: f64,
    pub frames: Vec<Frame>,
}

/// Pluggable per-file video decoder. Implementations must normalize
/// frames to planar 8-bit RGB.
pub trait VideoDecoder: Send + Sync {
    fn decode(&self, path: &Path) -> Result<DecodedVideo>;
}

/// Relative tolerance on the manifest frame rate versus the decoded one.
pub const FRAME_RATE_TOLERANCE: f64 = 0.005;

/// A decoded video with uniform random-access frames.
///
/// Dimensions, frame count, and frame rate always reflect the decoded
/// stream; manifest metadata that disagrees is reported in `warnings`.
#[derive(Debug, Clone)]
pub struct VideoAsset {
    video_id: String,
    frame_rate: f64,
    frames: Vec<Frame>,
    warnings: Vec<String>,
}

impl VideoAsset {
    pub fn from_decoded(video_id: impl Into<String>, decoded: DecodedVideo) -> Self {
        Self {
            video_id: video_id.into(),
            frame_rate: decoded.frame_rate,
            frames: decoded.frames,
            warnings: Vec::new(),
        }
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn width(&self) -> usize {
        self.frames.first().map_or(0, |f| f.width())
    }

    pub fn height(&self) -> usize {
        self.frames.first().map_or(0, |f| f.height())
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    /// Frame `i`; defined exactly for `i` in `[0, frame_count)`.
    pub fn frame(&self, i: usize) -> &Frame {
        &self.frames[i]
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Manifest-vs-stream metadata discrepancies found while opening.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Opens a manifest entry through `decoder`, checking its metadata against
/// the decoded stream. The decoded values always win; discrepancies beyond
/// tolerance (frame count exact, frame rate within 0.5%) are logged and
/// recorded on the asset.
pub fn open_video(entry: &ManifestEntry, manifest_dir: &Path, decoder: &dyn VideoDecoder) -> Result<VideoAsset> {
    let path = resolve_entry_path(entry, manifest_dir);
    let decoded = decoder.decode(&path)?;
    let mut warnings = Vec::new();
    if decoded.frames.len() != entry.frame_count as usize {
        warnings.push(format!(
            "frame_count: manifest says {}, stream has {}",
            entry.frame_count,
            decoded.frames.len()
        ));
    }
    let rate_err = (decoded.frame_rate - entry.fps).abs() / entry.fps;
    if rate_err > FRAME_RATE_TOLERANCE {
        warnings.push(format!(
            "fps: manifest says {}, stream has {}",
            entry.fps, decoded.frame_rate
        ));
    }
    if decoded.width != entry.width as usize || decoded.height != entry.height as usize {
        warnings.push(format!(
            "dimensions: manifest says {}x{}, stream has {}x{}",
            entry.width, entry.height, decoded.width, decoded.height
        ));
    }
    for w in &warnings {
        log::warn!("{}: {} (trusting decoded values)", entry.video_id, w);
    }
    Ok(VideoAsset {
        video_id: entry.video_id.clone(),
        frame_rate: decoded.frame_rate,
        frames: decoded.frames,
        warnings,
    })
}
