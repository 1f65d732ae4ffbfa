use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{OBJECT_FEATURE_DIM, POSE_FEATURE_DIM};
use crate::error::{Error, Result};

pub const PRODUCER_OBJECT: &str = "objectlm";
pub const PRODUCER_POSE: &str = "poselm";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub producer: String,
    pub model_id: String,
    pub subject_id: String,
}

/// Row-major `rows × dim` float32 matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f32>,
    pub meta: FeatureMeta,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    rows: usize,
    dim: usize,
    meta: FeatureMeta,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>, meta: FeatureMeta) -> Result<Self> {
        let m = FeatureMatrix { rows, dim, data, meta };
        m.check()?;
        Ok(m)
    }

    pub fn zeros(rows: usize, dim: usize, meta: FeatureMeta) -> Self {
        FeatureMatrix {
            rows,
            dim,
            data: vec![0.0; rows * dim],
            meta,
        }
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.dim + c]
    }

    pub fn expected_dim(producer: &str) -> Option<usize> {
        match producer {
            PRODUCER_OBJECT => Some(OBJECT_FEATURE_DIM),
            PRODUCER_POSE => Some(POSE_FEATURE_DIM),
            _ => None,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.data.len() != self.rows * self.dim {
            return Err(Error::Feature(format!(
                "data length {} != rows {} x dim {}",
                self.data.len(),
                self.rows,
                self.dim
            )));
        }
        if let Some(d) = Self::expected_dim(&self.meta.producer) {
            if d != self.dim {
                return Err(Error::Feature(format!(
                    "producer {} requires dim {d}, found {}",
                    self.meta.producer, self.dim
                )));
            }
        }
        Ok(())
    }
}

/// Sidecar path for a `.f32` feature file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `<path>` (raw little-endian f32) and its `.json` sidecar.
pub fn write_feature_matrix(m: &FeatureMatrix, path: &Path) -> Result<()> {
    m.check()?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut bytes = Vec::with_capacity(m.data.len() * 4);
    for v in &m.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    let sidecar = Sidecar {
        rows: m.rows,
        dim: m.dim,
        meta: m.meta.clone(),
    };
    let side = sidecar_path(path);
    std::fs::write(&side, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(&side, e))
}

pub fn read_feature_matrix(path: &Path) -> Result<FeatureMatrix> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text)
        .map_err(|e| Error::Feature(format!("{}: {e}", side.display())))?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = sidecar.rows * sidecar.dim * 4;
    if bytes.len() != expected {
        return Err(Error::Feature(format!(
            "{}: sidecar declares {}x{} ({expected} bytes) but binary has {} bytes",
            path.display(),
            sidecar.rows,
            sidecar.dim,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    FeatureMatrix::new(sidecar.rows, sidecar.dim, data, sidecar.meta)
}
