//! Dataset manifest: UTF-8 delimited text, one video per row.
//!
//! Schema (comma-separated, `.` decimal point, LF line endings):
//!
//! ```text
//! video_id,path,mos,width,height,fps,frame_count
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One manifest row: a video file plus its MOS label and stream metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub video_id: String,
    pub path: PathBuf,
    pub mos: f64,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub frame_count: u32,
}

impl ManifestEntry {
    fn validate(&self, path: &Path, line: u64) -> Result<()> {
        let fail = |message: String| Error::ManifestParse { path: path.to_path_buf(), line, message };
        if self.video_id.is_empty() {
            return Err(fail("empty video_id".into()));
        }
        if !self.mos.is_finite() {
            return Err(fail(format!("non-finite mos for `{}`", self.video_id)));
        }
        if !(self.fps > 0.0) {
            return Err(fail(format!("fps must be positive for `{}`, got {}", self.video_id, self.fps)));
        }
        if self.frame_count < 1 {
            return Err(fail(format!("frame_count must be >= 1 for `{}`", self.video_id)));
        }
        if self.width < 1 || self.height < 1 {
            return Err(fail(format!("dimensions must be positive for `{}`", self.video_id)));
        }
        Ok(())
    }
}

/// Parses and validates a manifest, preserving row order.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::ManifestParse { path: path.to_path_buf(), line: 1, message: e.to_string() })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::ManifestParse { path: path.to_path_buf(), line: 1, message: e.to_string() })?
        .clone();
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| Error::ManifestParse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let entry: ManifestEntry = record.deserialize(Some(&headers)).map_err(|e| Error::ManifestParse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        entry.validate(path, line)?;
        if !seen.insert(entry.video_id.clone()) {
            return Err(Error::DuplicateVideoId { path: path.to_path_buf(), video_id: entry.video_id, line });
        }
        entries.push(entry);
    }
    Ok(entries)
}

/// Writes a manifest with the canonical header and LF line endings.
pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(true)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path.as_ref())?;
    for entry in entries {
        writer.serialize(entry)?;
    }
    writer.flush()?;
    Ok(())
}

/// Video paths in a manifest are interpreted relative to the manifest's
/// directory unless absolute.
pub fn resolve_entry_path(entry: &ManifestEntry, manifest_dir: &Path) -> PathBuf {
    if entry.path.is_absolute() {
        entry.path.clone()
    } else {
        manifest_dir.join(&entry.path)
    }
}
