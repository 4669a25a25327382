use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::exact::check_inputs;
use super::{top_k, Hit};
use crate::embed::{dot, Vector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            max_iters: 25,
            tolerance: 1e-6,
        }
    }
}

fn l2_sq(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

fn nearest(centroids: &[f32], dim: usize, v: &[f32]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.chunks(dim).enumerate() {
        let d = l2_sq(centroid, v);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Lloyd's k-means over row-major data. Centroids start at distinct sampled
/// points; an empty cluster keeps its previous centroid. Returns the
/// centroids and the assignment of every row.
pub fn kmeans(
    data: &[f32],
    dim: usize,
    n_clusters: usize,
    seed: u64,
    params: KMeansParams,
) -> (Vec<f32>, Vec<usize>) {
    let n = if dim == 0 { 0 } else { data.len() / dim };
    let k = n_clusters.min(n).max(1);
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init: Vec<usize> = sample(&mut rng, n, k).into_vec();
    init.sort_unstable();
    let mut centroids: Vec<f32> = init
        .iter()
        .flat_map(|&i| data[i * dim..(i + 1) * dim].iter().copied())
        .collect();
    let mut assign = vec![0usize; n];
    for _ in 0..params.max_iters {
        assign = data
            .par_chunks(dim)
            .map(|v| nearest(&centroids, dim, v))
            .collect();
        let mut sums = vec![0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (row, &c) in data.chunks(dim).zip(&assign) {
            counts[c] += 1;
            for (s, &x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row) {
                *s += f64::from(x);
            }
        }
        let mut shift = 0f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let old = &mut centroids[c * dim..(c + 1) * dim];
            let mut moved = 0f64;
            for (o, s) in old.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                let new = (s / counts[c] as f64) as f32;
                moved += (f64::from(new) - f64::from(*o)).powi(2);
                *o = new;
            }
            shift = shift.max(moved.sqrt());
        }
        if shift < params.tolerance {
            break;
        }
    }
    assign = data
        .par_chunks(dim)
        .map(|v| nearest(&centroids, dim, v))
        .collect();
    (centroids, assign)
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IvfList {
    pub(crate) ids: Vec<u64>,
    pub(crate) data: Vec<f32>,
}

/// Inverted-file index: vectors are bucketed under their nearest k-means
/// centroid and a query scans the `nprobe` buckets whose centroids have the
/// largest inner product with it.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndexIvf {
    pub(crate) dim: usize,
    pub(crate) centroids: Vec<f32>,
    pub(crate) lists: Vec<IvfList>,
    pub nprobe: usize,
}

pub fn build_ivf(vectors: &[Vector], ids: &[u64], n_clusters: usize, seed: u64) -> Result<DenseIndexIvf> {
    if n_clusters == 0 {
        return Err(Error::Config("n_clusters must be at least 1".into()));
    }
    let dim = check_inputs(vectors, ids)?;
    let data: Vec<f32> = vectors.iter().flat_map(|v| v.values.iter().copied()).collect();
    let (centroids, assign) = kmeans(&data, dim, n_clusters, seed, KMeansParams::default());
    let k = if dim == 0 { 0 } else { centroids.len() / dim };
    let mut lists = vec![
        IvfList {
            ids: Vec::new(),
            data: Vec::new()
        };
        k
    ];
    for (i, &c) in assign.iter().enumerate() {
        lists[c].ids.push(ids[i]);
        lists[c].data.extend_from_slice(&data[i * dim..(i + 1) * dim]);
    }
    Ok(DenseIndexIvf {
        dim,
        centroids,
        lists,
        nprobe: k.clamp(1, 8),
    })
}

impl DenseIndexIvf {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_clusters(&self) -> usize {
        self.lists.len()
    }

    pub fn len(&self) -> usize {
        self.lists.iter().map(|l| l.ids.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sizes of the inverted lists.
    pub fn list_sizes(&self) -> Vec<usize> {
        self.lists.iter().map(|l| l.ids.len()).collect()
    }

    pub fn search(&self, q: &Vector, k: usize, nprobe: usize) -> Result<Vec<Hit>> {
        if self.is_empty() || k == 0 {
            return Ok(Vec::new());
        }
        if q.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: q.dim(),
            });
        }
        let mut order: Vec<(usize, f64)> = self
            .centroids
            .chunks(self.dim)
            .map(|c| dot(&q.values, c))
            .enumerate()
            .collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let hits: Vec<Hit> = order
            .iter()
            .take(nprobe.max(1))
            .flat_map(|&(c, _)| {
                let list = &self.lists[c];
                list.data
                    .chunks(self.dim)
                    .zip(&list.ids)
                    .map(|(row, &id)| Hit {
                        triple_id: id,
                        score: dot(&q.values, row),
                    })
            })
            .collect();
        Ok(top_k(hits, k))
    }
}
