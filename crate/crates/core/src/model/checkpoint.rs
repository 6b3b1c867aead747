//! Versioned checkpoint container.
//!
//! ```text
//! "P2PI"                 magic, 4 bytes
//! u32 version            currently 1
//! u32 len + bytes        ModelConfig JSON
//! u32 len + bytes        CheckpointStats JSON or `null`
//! u32 count              number of tensors
//! per tensor:
//!   u32 len + bytes      name (UTF-8)
//!   u32 ndim, u32 dims…  shape
//!   f32 × prod(dims)     data
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::weights::ModelWeights;
use crate::numerics::{Real, Tensor};
use crate::preprocess::{ChannelStats, PreprocessConfig, TargetStats};

pub const MAGIC: &[u8; 4] = b"P2PI";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Normalization state needed to run the model on raw recordings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointStats {
    pub feature_stats: ChannelStats,
    pub target_stats: TargetStats,
    pub preprocess: PreprocessConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub config: ModelConfig,
    pub stats: Option<CheckpointStats>,
    pub weights: ModelWeights<T>,
}

fn put_u32(out: &mut Vec<u8>, v: usize, field: &str) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::checkpoint(field, format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8], field: &str) -> Result<()> {
    put_u32(out, bytes.len(), field)?;
    out.extend_from_slice(bytes);
    Ok(())
}

/// Serializes a checkpoint; weights are stored as f32.
pub fn encode_checkpoint<T: Real>(
    weights: &ModelWeights<T>,
    config: &ModelConfig,
    stats: Option<&CheckpointStats>,
) -> Result<Vec<u8>> {
    config.validate()?;
    // Reject weights that would not load back under this config.
    let named: Vec<(String, Tensor<T>)> = weights.names().iter().cloned().zip(weights.tensors().iter().cloned()).collect();
    ModelWeights::from_named(config, named)?;

    let mut out = Vec::with_capacity(weights.parameter_count() * 4 + 4096);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_bytes(&mut out, serde_json::to_string(config)?.as_bytes(), "config")?;
    put_bytes(&mut out, serde_json::to_string(&stats)?.as_bytes(), "stats")?;
    put_u32(&mut out, weights.len(), "tensor_count")?;
    for (name, t) in weights.names().iter().zip(weights.tensors()) {
        put_bytes(&mut out, name.as_bytes(), name)?;
        put_u32(&mut out, t.rank(), name)?;
        for &d in t.shape() {
            put_u32(&mut out, d, name)?;
        }
        for v in t.data() {
            out.extend_from_slice(&(v.f64() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'b> {
    bytes: &'b [u8],
    pos: usize,
}

impl<'b> Reader<'b> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'b [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::checkpoint(field, format!("truncated at byte {} (need {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, field: &str) -> Result<usize> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn block(&mut self, field: &str) -> Result<&'b [u8]> {
        let n = self.u32(field)?;
        self.take(n, field)
    }
}

/// Parses a complete checkpoint. Nothing is returned unless every field,
/// shape and value validates against the embedded config.
pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::checkpoint("magic", "not a P2PI checkpoint"));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::checkpoint("version", format!("unsupported version {version}")));
    }
    let config: ModelConfig = serde_json::from_slice(r.block("config")?)
        .map_err(|e| Error::checkpoint("config", e.to_string()))?;
    config
        .validate()
        .map_err(|e| Error::checkpoint("config", e.to_string()))?;
    let stats: Option<CheckpointStats> = serde_json::from_slice(r.block("stats")?)
        .map_err(|e| Error::checkpoint("stats", e.to_string()))?;
    let count = r.u32("tensor_count")?;
    let mut named = Vec::with_capacity(count.min(4096));
    for i in 0..count {
        let name = std::str::from_utf8(r.block(&format!("tensor[{i}].name"))?)
            .map_err(|_| Error::checkpoint(format!("tensor[{i}].name"), "name is not UTF-8"))?
            .to_string();
        let ndim = r.u32(&name)?;
        if ndim == 0 || ndim > crate::numerics::tensor::MAX_RANK {
            return Err(Error::checkpoint(name, format!("rank {ndim} not supported")));
        }
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32(&name)?);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::checkpoint(name.clone(), "shape overflows"))?;
        let raw = r.take(n, &name)?;
        let data: Vec<T> = raw
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        let t = Tensor::new(&shape, data).map_err(|e| Error::checkpoint(name.clone(), e.to_string()))?;
        named.push((name, t));
    }
    if r.pos != bytes.len() {
        return Err(Error::checkpoint("trailer", format!("{} unexpected trailing bytes", bytes.len() - r.pos)));
    }
    let weights = ModelWeights::from_named(&config, named)?;
    Ok(Checkpoint { config, stats, weights })
}

pub fn save_weights<T: Real>(
    path: impl AsRef<Path>,
    weights: &ModelWeights<T>,
    config: &ModelConfig,
    stats: Option<&CheckpointStats>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(weights, config, stats)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_weights<T: Real>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
