use rayon::prelude::*;

use super::{top_k, Hit};
use crate::embed::{dot, Vector};
use crate::{Error, Result};

/// Brute-force inner-product index over row-major vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndexExact {
    pub(crate) dim: usize,
    pub(crate) data: Vec<f32>,
    pub(crate) ids: Vec<u64>,
}

pub(crate) fn check_inputs(vectors: &[Vector], ids: &[u64]) -> Result<usize> {
    if vectors.len() != ids.len() {
        return Err(Error::Config(format!(
            "{} vectors but {} ids",
            vectors.len(),
            ids.len()
        )));
    }
    let dim = vectors.first().map_or(0, Vector::dim);
    for v in vectors {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.dim(),
            });
        }
    }
    Ok(dim)
}

pub fn build_exact(vectors: &[Vector], ids: &[u64]) -> Result<DenseIndexExact> {
    let dim = check_inputs(vectors, ids)?;
    Ok(DenseIndexExact {
        dim,
        data: vectors.iter().flat_map(|v| v.values.iter().copied()).collect(),
        ids: ids.to_vec(),
    })
}

impl DenseIndexExact {
    pub fn from_parts(dim: usize, data: Vec<f32>, ids: Vec<u64>) -> Result<DenseIndexExact> {
        if data.len() != dim * ids.len() {
            return Err(Error::Format(format!(
                "vector blob holds {} floats, expected {}",
                data.len(),
                dim * ids.len()
            )));
        }
        Ok(DenseIndexExact { dim, data, ids })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn vector(&self, row: usize) -> &[f32] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    /// The `k` ids with the largest inner product with `q`.
    pub fn search(&self, q: &Vector, k: usize) -> Result<Vec<Hit>> {
        if self.is_empty() || k == 0 {
            return Ok(Vec::new());
        }
        if q.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: q.dim(),
            });
        }
        let hits: Vec<Hit> = self
            .data
            .par_chunks(self.dim)
            .zip(self.ids.par_iter())
            .map(|(row, &id)| Hit {
                triple_id: id,
                score: dot(&q.values, row),
            })
            .collect();
        Ok(top_k(hits, k))
    }
}
