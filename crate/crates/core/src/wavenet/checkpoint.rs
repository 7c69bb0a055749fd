//! `RFSEPCK1` checkpoints: magic, `u32` LE manifest length, JSON manifest
//! (config plus a named tensor table), then raw little-endian `f64` payloads
//! in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{WaveNetConfig, WaveNetModel};
use crate::binfmt::{self, FormatError};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RFSEPCK1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    /// Byte offset from the start of the payload region.
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    config: WaveNetConfig,
    tensors: Vec<TensorEntry>,
    #[serde(default)]
    meta: serde_json::Value,
}

/// Serializes `model`; `meta` is stored verbatim (e.g. epoch, val loss).
pub fn encode_checkpoint(model: &WaveNetModel, meta: serde_json::Value) -> Vec<u8> {
    let mut payload = Vec::new();
    let mut tensors = Vec::new();
    for (name, t) in model.named_tensors() {
        tensors.push(TensorEntry {
            name,
            shape: t.shape().to_vec(),
            dtype: "f64".into(),
            offset: payload.len(),
        });
        binfmt::push_f64s(&mut payload, t.data().iter().copied());
    }
    let manifest = Manifest {
        config: model.config().clone(),
        tensors,
        meta,
    };
    binfmt::encode(CHECKPOINT_MAGIC, &manifest, &payload)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(WaveNetModel, serde_json::Value)> {
    let (manifest, payload): (Manifest, _) = binfmt::decode(CHECKPOINT_MAGIC, bytes)?;
    let mut expected = 0usize;
    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for entry in &manifest.tensors {
        if entry.dtype != "f64" {
            return Err(FormatError::Manifest {
                offset: 12,
                reason: format!("tensor `{}` has unsupported dtype {:?}", entry.name, entry.dtype),
            }
            .into());
        }
        if entry.offset != expected {
            return Err(FormatError::OffsetMismatch {
                offset: payload.absolute(entry.offset),
                reason: format!("tensor `{}` should start at payload byte {expected}", entry.name),
            }
            .into());
        }
        let n: usize = entry.shape.iter().product();
        tensors.push((entry.name.clone(), payload.f64s(entry.offset, n)?));
        expected += 8 * n;
    }
    if expected != payload.len() {
        return Err(FormatError::OffsetMismatch {
            offset: payload.absolute(expected),
            reason: format!("{} unexpected trailing bytes", payload.len().saturating_sub(expected)),
        }
        .into());
    }
    // the seed is irrelevant: every tensor is overwritten
    let mut model = WaveNetModel::new(manifest.config, 0)?;
    let shapes_match = model
        .named_tensors()
        .iter()
        .zip(&manifest.tensors)
        .all(|((_, t), e)| t.shape() == e.shape.as_slice());
    if !shapes_match {
        return Err(Error::Config("checkpoint tensor shapes do not match its config".into()));
    }
    model.load_tensors(tensors)?;
    Ok((model, manifest.meta))
}

pub fn save_checkpoint(model: &WaveNetModel, path: &Path, meta: serde_json::Value) -> Result<()> {
    let bytes = encode_checkpoint(model, meta);
    // write-then-rename so a crash never leaves a half-written checkpoint
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(Error::io(&tmp))?;
    std::fs::rename(&tmp, path).map_err(Error::io(path))
}

pub fn load_checkpoint(path: &Path) -> Result<(WaveNetModel, serde_json::Value)> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    decode_checkpoint(&bytes)
}
