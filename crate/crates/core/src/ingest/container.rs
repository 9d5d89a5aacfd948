//! Uncompressed video container used by the synthetic generator and the
//! built-in decoder.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "MVQV"
//! version u16      1
//! width   u32
//! height  u32
//! fps     f64
//! frames  u32
//! data    frames * width * height * 3 bytes, planar RGB per frame
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::ingest::{DecodedVideo, VideoDecoder};

pub const CONTAINER_MAGIC: [u8; 4] = *b"MVQV";
pub const CONTAINER_VERSION: u16 = 1;
/// Conventional file extension for the raw container.
pub const CONTAINER_EXTENSION: &str = "mvv";

/// Writes a frame sequence into the raw container format.
pub fn write_container(path: impl AsRef<Path>, frames: &[Frame], fps: f64) -> Result<()> {
    let path = path.as_ref();
    let encode_err = |message: String| Error::Encode { path: path.to_path_buf(), message };
    let first = frames.first().ok_or_else(|| encode_err("no frames to write".into()))?;
    let (w, h) = (first.width(), first.height());
    if frames.iter().any(|f| f.width() != w || f.height() != h) {
        return Err(encode_err("all frames must share dimensions".into()));
    }
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&CONTAINER_MAGIC)?;
    out.write_all(&CONTAINER_VERSION.to_le_bytes())?;
    out.write_all(&(w as u32).to_le_bytes())?;
    out.write_all(&(h as u32).to_le_bytes())?;
    out.write_all(&fps.to_le_bytes())?;
    out.write_all(&(frames.len() as u32).to_le_bytes())?;
    for frame in frames {
        out.write_all(frame.data())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a raw container back into memory.
pub fn read_container(path: impl AsRef<Path>) -> Result<DecodedVideo> {
    let path = path.as_ref();
    let decode_err = |message: String| Error::Decode { path: path.to_path_buf(), message };
    let mut input = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(|e| decode_err(format!("header: {e}")))?;
    if magic != CONTAINER_MAGIC {
        return Err(decode_err("bad magic, not a raw video container".into()));
    }
    let mut u16buf = [0u8; 2];
    input.read_exact(&mut u16buf).map_err(|e| decode_err(format!("header: {e}")))?;
    let version = u16::from_le_bytes(u16buf);
    if version != CONTAINER_VERSION {
        return Err(decode_err(format!("unsupported container version {version}")));
    }
    let mut u32buf = [0u8; 4];
    input.read_exact(&mut u32buf).map_err(|e| decode_err(format!("header: {e}")))?;
    let width = u32::from_le_bytes(u32buf) as usize;
    input.read_exact(&mut u32buf).map_err(|e| decode_err(format!("header: {e}")))?;
    let height = u32::from_le_bytes(u32buf) as usize;
    let mut f64buf = [0u8; 8];
    input.read_exact(&mut f64buf).map_err(|e| decode_err(format!("header: {e}")))?;
    let fps = f64::from_le_bytes(f64buf);
    input.read_exact(&mut u32buf).map_err(|e| decode_err(format!("header: {e}")))?;
    let n_frames = u32::from_le_bytes(u32buf) as usize;

    if width == 0 || height == 0 || n_frames == 0 || !(fps > 0.0) {
        return Err(decode_err("degenerate stream metadata".into()));
    }
    let frame_bytes = width * height * 3;
    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let mut data = vec![0u8; frame_bytes];
        input
            .read_exact(&mut data)
            .map_err(|e| decode_err(format!("frame {i}: {e}")))?;
        frames.push(Frame::new(width, height, data)?);
    }
    Ok(DecodedVideo { width, height, frame_rate: fps, frames })
}

/// Built-in decoder for the raw container format.
#[derive(Debug, Default, Clone, Copy)]
pub struct RawContainerDecoder;

impl VideoDecoder for RawContainerDecoder {
    fn decode(&self, path: &Path) -> Result<DecodedVideo> {
        read_container(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let frames: Vec<Frame> = (0..5)
            .map(|t| Frame::from_fn(20, 12, |c, x, y| ((t * 31 + c * 7 + x * 3 + y) % 256) as u8))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.mvv");
        write_container(&path, &frames, 12.5).unwrap();
        let back = read_container(&path).unwrap();
        assert_eq!(back.frame_rate, 12.5);
        assert_eq!(back.frames, frames);
    }

    #[test]
    fn rejects_truncated_file() {
        let frames = vec![Frame::constant(8, 8, [1, 2, 3]); 3];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.mvv");
        write_container(&path, &frames, 10.0).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(read_container(&path), Err(Error::Decode { .. })));
    }

    #[test]
    fn rejects_wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("not_a_video.mvv");
        std::fs::write(&path, b"JUNKJUNKJUNK").unwrap();
        assert!(matches!(read_container(&path), Err(Error::Decode { .. })));
    }
}
