//! Parameter checkpoints: a JSON manifest plus one little-endian `f32` blob.
//!
//! ```text
//! <dir>/params.json   { "format": 1, "total_bytes": N, "params": [{name, shape, offset, trainable}, ...] }
//! <dir>/params.bin    concatenated f32 LE values, in manifest order
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "params.json";
pub const BLOB_FILE: &str = "params.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: u64,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamManifest {
    pub format: u32,
    pub total_bytes: u64,
    pub params: Vec<ParamEntry>,
}

pub fn save_checkpoint(dir: &Path, params: &ParamStore<f32>) -> Result<ParamManifest> {
    fs::create_dir_all(dir)?;
    let mut blob = Vec::new();
    let mut entries = Vec::with_capacity(params.len());
    for p in params.iter() {
        entries.push(ParamEntry {
            name: p.name.clone(),
            shape: p.tensor.shape.clone(),
            offset: blob.len() as u64,
            trainable: p.trainable,
        });
        for v in &p.tensor.data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = ParamManifest { format: 1, total_bytes: blob.len() as u64, params: entries };
    fs::write(dir.join(BLOB_FILE), &blob)?;
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<ParamStore<f32>> {
    let manifest: ParamManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    if manifest.format != 1 {
        return Err(Error::Checkpoint(format!("unsupported format {}", manifest.format)));
    }
    let blob = fs::read(dir.join(BLOB_FILE))?;
    if blob.len() as u64 != manifest.total_bytes {
        return Err(Error::Checkpoint(format!("blob is {} bytes, manifest says {}", blob.len(), manifest.total_bytes)));
    }
    let mut store = ParamStore::new();
    for e in manifest.params {
        let n: usize = e.shape.iter().product();
        let start = e.offset as usize;
        let end = start + 4 * n;
        if end > blob.len() {
            return Err(Error::Checkpoint(format!("`{}` runs past the end of the blob", e.name)));
        }
        let data = blob[start..end].chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        store.insert(e.name, Tensor::new(e.shape, data)?, e.trainable)?;
    }
    Ok(store)
}
