//! Self-describing checkpoint files.
//!
//! Layout:
//!
//! ```text
//! b"OILCKPT1"                     8-byte magic
//! header_len: u64 little-endian
//! header: JSON, header_len bytes  model spec, scaler, input layout, manifest
//! payload: f64 little-endian      each array row-major at its manifest offset
//! ```
//!
//! Manifest offsets are byte offsets from the start of the payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::Model;
use super::spec::{ModelSpec, ParameterSet};
use crate::dataset::Scaler;
use crate::error::{Error, Result};
use crate::numeric::Array2;

const MAGIC: &[u8; 8] = b"OILCKPT1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: u64,
}

/// Which dataset columns a checkpointed model reads and predicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputLayout {
    pub features: Vec<String>,
    pub target: String,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    scaler: Option<Scaler>,
    layout: Option<InputLayout>,
    arrays: Vec<ArrayEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub scaler: Option<Scaler>,
    pub layout: Option<InputLayout>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut arrays = Vec::with_capacity(self.model.params.len());
        let mut payload = Vec::with_capacity(self.model.params.scalar_count() * 8);
        for (name, a) in self.model.params.iter() {
            arrays.push(ArrayEntry {
                name: name.clone(),
                rows: a.rows(),
                cols: a.cols(),
                offset: payload.len() as u64,
            });
            for v in a.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = serde_json::to_vec(&Header {
            spec: self.model.spec.clone(),
            scaler: self.scaler.clone(),
            layout: self.layout.clone(),
            arrays,
        })?;
        let mut out = Vec::with_capacity(16 + header.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let header_end = 16usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[16..header_end])?;
        let payload = &bytes[header_end..];

        let mut params = ParameterSet::from_arrays(Default::default());
        for entry in &header.arrays {
            let start = entry.offset as usize;
            let end = start + entry.rows * entry.cols * 8;
            let raw = payload.get(start..end).ok_or_else(|| {
                Error::Checkpoint(format!("array `{}` runs past the payload", entry.name))
            })?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            params.insert(
                entry.name.clone(),
                Array2::new(entry.rows, entry.cols, data)?,
            );
        }
        Ok(Self {
            model: Model::new(header.spec, params)?,
            scaler: header.scaler,
            layout: header.layout,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
