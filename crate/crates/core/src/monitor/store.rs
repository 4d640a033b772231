//! Cache persistence: a flat binary file (`u32` LE dimension, `u32` LE count,
//! then count·dimension `f32` LE components, row by row) and a JSON sidecar.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EmbeddingCache;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheSidecar {
    pub d: usize,
    pub n: usize,
    pub source_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

/// Writes `path` and `path.json`.
pub fn save_cache<T: Real>(cache: &EmbeddingCache<T>, path: &Path, alpha: Option<f64>, tau: Option<f64>) -> Result<()> {
    let d = u32::try_from(cache.dim()).map_err(|_| Error::invalid("dimension exceeds u32"))?;
    let n = u32::try_from(cache.len()).map_err(|_| Error::invalid("cache size exceeds u32"))?;
    let mut bytes = Vec::with_capacity(8 + 4 * cache.len() * cache.dim());
    bytes.extend_from_slice(&d.to_le_bytes());
    bytes.extend_from_slice(&n.to_le_bytes());
    for v in cache.vectors() {
        for &x in v {
            bytes.extend_from_slice(&(x.to_f32().unwrap_or(f32::NAN)).to_le_bytes());
        }
    }
    std::fs::write(path, &bytes).map_err(|e| Error::io(format!("write {}", path.display()), e))?;
    let sidecar = CacheSidecar { d: cache.dim(), n: cache.len(), source_ids: cache.source_ids().to_vec(), alpha, tau };
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::json("cache sidecar", e))?;
    let side = sidecar_path(path);
    std::fs::write(&side, json + "\n").map_err(|e| Error::io(format!("write {}", side.display()), e))
}

/// Reads a cache written by [`save_cache`]. Vectors are re-normalized in `T`.
pub fn load_cache<T: Real>(path: &Path) -> Result<(EmbeddingCache<T>, CacheSidecar)> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::MissingFile(path.to_path_buf())),
        Err(e) => return Err(Error::io(format!("read {}", path.display()), e)),
    };
    if bytes.len() < 8 {
        return Err(Error::invalid(format!("{}: truncated header", path.display())));
    }
    let d = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
    let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let expected = n.checked_mul(d).and_then(|c| c.checked_mul(4)).and_then(|c| c.checked_add(8));
    if expected != Some(bytes.len()) {
        return Err(Error::invalid(format!("{}: payload size does not match header d={d} n={n}", path.display())));
    }
    let side = sidecar_path(path);
    let sidecar: CacheSidecar = match std::fs::read_to_string(&side) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| Error::json(side.display().to_string(), e))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            CacheSidecar { d, n, source_ids: (0..n).map(|i| i.to_string()).collect(), alpha: None, tau: None }
        }
        Err(e) => return Err(Error::io(format!("read {}", side.display()), e)),
    };
    if sidecar.d != d || sidecar.n != n || sidecar.source_ids.len() != n {
        return Err(Error::DimensionMismatch(format!("{} disagrees with the binary header", side.display())));
    }
    let mut cache = EmbeddingCache::new(d)?;
    for (i, chunk) in bytes[8..].chunks_exact(4 * d.max(1)).enumerate() {
        let v: Vec<T> = chunk
            .chunks_exact(4)
            .map(|c| T::from_f32(f32::from_le_bytes(c.try_into().expect("4 bytes"))).unwrap_or_else(T::nan))
            .collect();
        cache.insert(sidecar.source_ids[i].clone(), &v)?;
    }
    Ok((cache, sidecar))
}
