//! First-stage retrieval: exact and inverted-file dense indexes, a BM25
//! sparse index, on-disk persistence and two-round retrieval with squashing.

mod exact;
mod ivf;
mod persist;
mod retrieve;
mod sparse;

use std::cmp::Ordering;

pub use exact::{build_exact, DenseIndexExact};
pub use ivf::{build_ivf, kmeans, DenseIndexIvf, KMeansParams};
pub use persist::{FirstStageIndex, IndexKind, IndexManifest, INDEX_FORMAT_VERSION};
pub use retrieve::{squash, two_round, two_round_retrieve, RetrievalParams, RetrievalResult};
pub use sparse::{Bm25Params, SparseIndex};

/// A scored index entry before table attribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub triple_id: u64,
    pub score: f64,
}

/// Ranking order used everywhere: score descending, then smaller id.
pub fn hit_order(a: &Hit, b: &Hit) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.triple_id.cmp(&b.triple_id))
}

/// Keeps the `k` best hits in ranking order.
pub fn top_k(mut hits: Vec<Hit>, k: usize) -> Vec<Hit> {
    if k == 0 {
        return Vec::new();
    }
    if hits.len() > k {
        hits.select_nth_unstable_by(k - 1, hit_order);
        hits.truncate(k);
    }
    hits.sort_by(hit_order);
    hits
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_k_orders_and_breaks_ties() {
        let hits = vec![
            Hit { triple_id: 5, score: 0.5 },
            Hit { triple_id: 2, score: 0.9 },
            Hit { triple_id: 1, score: 0.5 },
            Hit { triple_id: 9, score: 0.1 },
        ];
        let top = top_k(hits.clone(), 3);
        let ids: Vec<u64> = top.iter().map(|h| h.triple_id).collect();
        assert_eq!(ids, vec![2, 1, 5]);
        assert!(top_k(hits.clone(), 0).is_empty());
        assert_eq!(top_k(hits, 10).len(), 4);
    }
}
