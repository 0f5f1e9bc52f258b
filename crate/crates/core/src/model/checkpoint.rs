//! Self-describing checkpoint container.
//!
//! Layout: 8-byte magic `PFCKPT01`, little-endian `u64` header length, a JSON
//! header (backbone config, tokenizer, tensor directory, free-form metadata),
//! then every tensor's entries as little-endian `f64` in directory order.
//! Weights are stored as raw bits so a save/load cycle is bit-exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tensor::Matrix;
use super::{BackboneConfig, ModelError};

const MAGIC: &[u8; 8] = b"PFCKPT01";

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    config: BackboneConfig,
    tokenizer: serde_json::Value,
    tokenizer_fingerprint: String,
    tensors: Vec<TensorEntry>,
    metadata: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: BackboneConfig,
    pub params: ParamStore,
    pub tokenizer: serde_json::Value,
    pub tokenizer_fingerprint: String,
    pub metadata: serde_json::Value,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>, ModelError> {
        let header = Header {
            config: self.config.clone(),
            tokenizer: self.tokenizer.clone(),
            tokenizer_fingerprint: self.tokenizer_fingerprint.clone(),
            tensors: self
                .params
                .named()
                .iter()
                .map(|t| TensorEntry {
                    name: t.name.clone(),
                    rows: t.value.rows,
                    cols: t.value.cols,
                })
                .collect(),
            metadata: self.metadata.clone(),
        };
        let header = serde_json::to_vec(&header).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(16 + header.len() + self.params.num_scalars() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in self.params.named() {
            for v in &t.value.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let bad = |msg: &str| ModelError::Checkpoint(msg.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing checkpoint magic"));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body_start = 16usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[16..body_start])
            .map_err(|e| ModelError::Checkpoint(format!("header: {e}")))?;
        let mut reader = &bytes[body_start..];
        let mut params = ParamStore::default();
        for entry in header.tensors {
            let n = entry.rows * entry.cols;
            let mut data = Vec::with_capacity(n);
            let mut buf = [0u8; 8];
            for _ in 0..n {
                reader
                    .read_exact(&mut buf)
                    .map_err(|_| bad("truncated tensor data"))?;
                data.push(f64::from_le_bytes(buf));
            }
            params.push(entry.name, Matrix::from_vec(entry.rows, entry.cols, data));
        }
        if !reader.is_empty() {
            return Err(bad("trailing bytes after tensor data"));
        }
        Ok(Self {
            config: header.config,
            params,
            tokenizer: header.tokenizer,
            tokenizer_fingerprint: header.tokenizer_fingerprint,
            metadata: header.metadata,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        f.sync_all()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_bytes(&fs::read(path)?)
    }
}
