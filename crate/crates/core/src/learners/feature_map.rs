use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

use super::vvft;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMapKind {
    Identity,
    /// Seeded Gaussian projection scaled by `1/√d_φ`.
    RandomProjection { output_dim: usize, seed: u64 },
    /// Linear map loaded from a VVFT file with `d_in` rows and `d_φ` columns.
    Precomputed { path: PathBuf },
}

/// A data-independent feature map `φ: R^{d_in} → R^{d_φ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    kind: FeatureMapKind,
    input_dim: usize,
    /// `d_in × d_φ`, row-major; absent for the identity.
    matrix: Option<Vec<Vec<f64>>>,
}

impl FeatureMap {
    pub fn identity(input_dim: usize) -> Self {
        FeatureMap {
            kind: FeatureMapKind::Identity,
            input_dim,
            matrix: None,
        }
    }

    pub fn random_projection(input_dim: usize, output_dim: usize, seed: u64) -> Result<Self> {
        if output_dim == 0 {
            return Err(Error::param("projection output dimension must be positive"));
        }
        let mut rng = stream_rng(seed, Stream::Projection, &[input_dim as u64, output_dim as u64]);
        let scale = 1.0 / (output_dim as f64).sqrt();
        let matrix = (0..input_dim)
            .map(|_| {
                (0..output_dim)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        Ok(FeatureMap {
            kind: FeatureMapKind::RandomProjection { output_dim, seed },
            input_dim,
            matrix: Some(matrix),
        })
    }

    pub fn precomputed(path: &Path) -> Result<Self> {
        let matrix = vvft::read_features(path)?;
        let cols = matrix.first().map_or(0, Vec::len);
        if matrix.is_empty() || cols == 0 {
            return Err(Error::Format(format!(
                "{}: feature map matrix is empty",
                path.display()
            )));
        }
        Ok(FeatureMap {
            kind: FeatureMapKind::Precomputed {
                path: path.to_path_buf(),
            },
            input_dim: matrix.len(),
            matrix: Some(matrix),
        })
    }

    pub fn from_kind(kind: &FeatureMapKind, input_dim: usize) -> Result<Self> {
        let map = match kind {
            FeatureMapKind::Identity => FeatureMap::identity(input_dim),
            FeatureMapKind::RandomProjection { output_dim, seed } => {
                FeatureMap::random_projection(input_dim, *output_dim, *seed)?
            }
            FeatureMapKind::Precomputed { path } => FeatureMap::precomputed(path)?,
        };
        if map.input_dim != input_dim {
            return Err(Error::Dimension {
                expected: input_dim,
                got: map.input_dim,
            });
        }
        Ok(map)
    }

    pub fn kind(&self) -> &FeatureMapKind {
        &self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.matrix
            .as_ref()
            .map_or(self.input_dim, |m| m.first().map_or(0, Vec::len))
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let Some(matrix) = &self.matrix else {
            return Ok(x.to_vec());
        };
        let mut out = vec![0.0; self.output_dim()];
        for (xi, row) in x.iter().zip(matrix) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
        Ok(out)
    }
}
