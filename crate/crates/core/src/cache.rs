//! On-disk cache for local-value grids: raw little-endian `f64` data next to a
//! JSON sidecar describing its shape and provenance.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shapley::LsvMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub n_fore: usize,
    pub n_back: usize,
    pub d: usize,
    pub model_hash: String,
    pub foreground_ids: Vec<usize>,
    pub background_ids: Vec<usize>,
    pub feature_names: Vec<String>,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

pub fn save_lsv(path: impl AsRef<Path>, lsv: &LsvMatrix, meta: &CacheMeta) -> Result<()> {
    let path = path.as_ref();
    if (meta.n_fore, meta.n_back, meta.d) != (lsv.n_fore, lsv.n_back, lsv.d) {
        return Err(Error::arg("cache metadata does not match the matrix shape"));
    }
    let mut bytes = Vec::with_capacity(lsv.data.len() * 8);
    for v in &lsv.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    fs::write(sidecar(path), text)?;
    Ok(())
}

/// Loads a cached grid, refusing it when the model hash differs.
pub fn load_lsv(path: impl AsRef<Path>, expected_model_hash: &str) -> Result<(LsvMatrix, CacheMeta)> {
    let path = path.as_ref();
    let meta_path = sidecar(path);
    let meta: CacheMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| Error::parse(meta_path.display().to_string(), e.to_string()))?;
    if meta.model_hash != expected_model_hash {
        return Err(Error::Data(format!(
            "cache {} was built for model {}, not {expected_model_hash}",
            path.display(),
            meta.model_hash
        )));
    }
    let bytes = fs::read(path)?;
    let cells = meta.n_fore * meta.n_back * meta.d;
    if bytes.len() != cells * 8 {
        return Err(Error::Data(format!(
            "cache {} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            cells * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((
        LsvMatrix {
            n_fore: meta.n_fore,
            n_back: meta.n_back,
            d: meta.d,
            data,
        },
        meta,
    ))
}
