//! Persistent feature cache.
//!
//! One file per (video, analyzer) pair holds every key-frame record.
//! Binary layout, integers little-endian:
//!
//! ```text
//! magic          4 bytes   "MVQF"
//! version        u16       1
//! video_id_len   u16       followed by that many UTF-8 bytes
//! config_digest  32 bytes  preprocess-config digest
//! backend_id_len u16       followed by that many UTF-8 bytes
//! pooling        u8        0 = avg, 1 = avg_std
//! k              u32       number of key-frame records
//! d_s            u32       spatial dimension
//! d_t            u32       temporal dimension, 0 = absent
//! records        k * (d_s + d_t) f32 values (IEEE-754)
//! checksum       u64       of every preceding byte
//! ```
//!
//! The checksum is the first 8 bytes of the SHA-256 of the payload read
//! as a little-endian u64. A mismatch (or any malformed field) is treated
//! as a cache miss with a warning, never as data. Writes go through a
//! temp file plus rename, so concurrent readers only ever see complete
//! files.

use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::PoolingMode;

pub const CACHE_MAGIC: [u8; 4] = *b"MVQF";
pub const CACHE_VERSION: u16 = 1;
pub const CACHE_EXTENSION: &str = "mvqf";

/// Pooled features of one key frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    /// Spatial vector `s_i`.
    pub spatial: Vec<f32>,
    /// Temporal vector `t_i`; present only when a temporal analyzer ran.
    pub temporal: Option<Vec<f32>>,
}

impl FeatureRecord {
    /// Concatenated `[s_i || t_i]` as f64 rows for the regressor.
    pub fn row(&self) -> Vec<f64> {
        let mut row: Vec<f64> = self.spatial.iter().map(|&v| v as f64).collect();
        if let Some(t) = &self.temporal {
            row.extend(t.iter().map(|&v| v as f64));
        }
        row
    }
}

/// Identity of one cache entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheKey {
    pub video_id: String,
    /// Digest of the preprocess configuration.
    pub config_digest: [u8; 32],
    /// Composite analyzer id (see [`crate::features::analyzer_id`]).
    pub backend_id: String,
    pub pooling: PoolingMode,
}

fn pooling_byte(mode: PoolingMode) -> u8 {
    match mode {
        PoolingMode::Avg => 0,
        PoolingMode::AvgStd => 1,
    }
}

fn pooling_from_byte(b: u8) -> Result<PoolingMode> {
    match b {
        0 => Ok(PoolingMode::Avg),
        1 => Ok(PoolingMode::AvgStd),
        other => Err(Error::Cache(format!("unknown pooling byte {other}"))),
    }
}

fn checksum(payload: &[u8]) -> u64 {
    let digest = Sha256::digest(payload);
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 is at least 8 bytes"))
}

/// Serializes records into the documented byte layout.
pub fn encode_records(key: &CacheKey, records: &[FeatureRecord]) -> Result<Vec<u8>> {
    let d_s = records.first().map_or(0, |r| r.spatial.len());
    let d_t = records.first().map_or(0, |r| r.temporal.as_ref().map_or(0, |t| t.len()));
    for r in records {
        let got_t = r.temporal.as_ref().map_or(0, |t| t.len());
        if r.spatial.len() != d_s || got_t != d_t {
            return Err(Error::Cache("records disagree on feature dimensions".into()));
        }
        if r.spatial.iter().chain(r.temporal.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Cache("non-finite feature value".into()));
        }
    }
    if key.video_id.len() > u16::MAX as usize || key.backend_id.len() > u16::MAX as usize {
        return Err(Error::Cache("video or backend id too long".into()));
    }

    let mut out = Vec::new();
    out.extend_from_slice(&CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(key.video_id.len() as u16).to_le_bytes());
    out.extend_from_slice(key.video_id.as_bytes());
    out.extend_from_slice(&key.config_digest);
    out.extend_from_slice(&(key.backend_id.len() as u16).to_le_bytes());
    out.extend_from_slice(key.backend_id.as_bytes());
    out.push(pooling_byte(key.pooling));
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    out.extend_from_slice(&(d_s as u32).to_le_bytes());
    out.extend_from_slice(&(d_t as u32).to_le_bytes());
    for r in records {
        for v in r.spatial.iter().chain(r.temporal.iter().flatten()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sum = checksum(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    Ok(out)
}

/// Parses and checksums a cache file; returns the stored key and records.
pub fn decode_records(bytes: &[u8]) -> Result<(CacheKey, Vec<FeatureRecord>)> {
    let corrupt = |what: &str| Error::Cache(format!("corrupt cache file: {what}"));
    if bytes.len() < 8 {
        return Err(corrupt("too short"));
    }
    let (payload, sum_bytes) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(sum_bytes.try_into().expect("8 bytes"));
    if checksum(payload) != stored {
        return Err(corrupt("checksum mismatch"));
    }

    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > payload.len() {
            return Err(corrupt("truncated payload"));
        }
        let slice = &payload[*pos..*pos + n];
        *pos += n;
        Ok(slice)
    };

    if take(&mut pos, 4)? != CACHE_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(Error::Cache(format!("unsupported cache version {version}")));
    }
    let id_len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
    let video_id = String::from_utf8(take(&mut pos, id_len)?.to_vec()).map_err(|_| corrupt("video id utf-8"))?;
    let mut config_digest = [0u8; 32];
    config_digest.copy_from_slice(take(&mut pos, 32)?);
    let backend_len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
    let backend_id =
        String::from_utf8(take(&mut pos, backend_len)?.to_vec()).map_err(|_| corrupt("backend id utf-8"))?;
    let pooling = pooling_from_byte(take(&mut pos, 1)?[0])?;
    let k = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let d_s = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let d_t = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;

    let per_record = d_s + d_t;
    let mut records = Vec::with_capacity(k);
    for _ in 0..k {
        let raw = take(&mut pos, per_record * 4)?;
        let mut values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let spatial: Vec<f32> = values.by_ref().take(d_s).collect();
        let temporal: Vec<f32> = values.collect();
        records.push(FeatureRecord {
            spatial,
            temporal: if d_t == 0 { None } else { Some(temporal) },
        });
    }
    if pos != payload.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok((CacheKey { video_id, config_digest, backend_id, pooling }, records))
}

/// Directory-backed feature cache with atomic writes.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Deterministic file name for a key: sanitized ids plus a short hash
    /// of the full key to rule out collisions after sanitizing.
    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        let sanitize = |s: &str| -> String {
            s.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
        };
        let mut hasher = Sha256::new();
        hasher.update(key.video_id.as_bytes());
        hasher.update([0]);
        hasher.update(key.backend_id.as_bytes());
        hasher.update([pooling_byte(key.pooling)]);
        hasher.update(key.config_digest);
        let tag = hex(&hasher.finalize()[..8]);
        self.dir.join(format!(
            "{}__{}__{}__{tag}.{CACHE_EXTENSION}",
            sanitize(&key.video_id),
            sanitize(&key.backend_id),
            key.pooling.as_str(),
        ))
    }

    /// Writes records atomically (temp file + rename).
    pub fn put(&self, key: &CacheKey, records: &[FeatureRecord]) -> Result<PathBuf> {
        let bytes = encode_records(key, records)?;
        let path = self.path_for(key);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(&bytes)?;
        tmp.flush()?;
        tmp.persist(&path).map_err(|e| Error::Cache(format!("persist {}: {}", path.display(), e.error)))?;
        Ok(path)
    }

    /// Reads records for a key. Corruption, checksum failures, and stale
    /// entries (any key field mismatch) all surface as a miss.
    pub fn get(&self, key: &CacheKey) -> Result<Option<Vec<FeatureRecord>>> {
        let path = self.path_for(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        match decode_records(&bytes) {
            Ok((stored, records)) if &stored == key => Ok(Some(records)),
            Ok((stored, _)) => {
                log::warn!(
                    "cache entry {} belongs to a different key (stored video `{}`, backend `{}`); treating as miss",
                    path.display(),
                    stored.video_id,
                    stored.backend_id
                );
                Ok(None)
            }
            Err(e) => {
                log::warn!("cache entry {} unreadable ({e}); treating as miss", path.display());
                Ok(None)
            }
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hex rendering of a 32-byte digest (config digests in reports).
pub fn digest_hex(digest: &[u8; 32]) -> String {
    hex(digest)
}
