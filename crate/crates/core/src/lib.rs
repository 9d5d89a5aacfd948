//! Minimalistic blind video quality assessment (BVQA).
//!
//! The pipeline is built from four small blocks: a video preprocessor
//! (aggressive spatiotemporal downsampling into key frames and video
//! chunks), a spatial quality analyzer, an optional temporal quality
//! analyzer, and a linear quality regressor trained with a correlation
//! loss. Around those sit dataset ingestion, a persistent feature cache,
//! and the evaluation machinery (SRCC, logistic-mapped PLCC, split
//! protocols, cross-dataset runs, and spatial-vs-temporal diagnostics).
//!
//! Modules map onto the pipeline stages:
//!
//! - [`ingest`]: dataset manifests, video decoding, synthetic corpora
//! - [`preprocess`]: key-frame selection, downsampling, chunk extraction
//! - [`features`]: analyzer backends, pooling, SI/TI, feature cache
//! - [`model`]: regression head, losses, training
//! - [`eval`]: correlation metrics, logistic fitting, split protocols

pub mod error;
pub mod eval;
pub mod features;
pub mod frame;
pub mod ingest;
pub mod model;
pub mod preprocess;

pub use error::{Error, Result};
pub use frame::Frame;
pub use ingest::{ManifestEntry, SyntheticSpec, VideoAsset};
pub use preprocess::{ChunkPlan, KeyFrame, PreprocessConfig, VideoChunk};
