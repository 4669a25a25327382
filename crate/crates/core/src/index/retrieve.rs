use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{FirstStageIndex, Hit};
use crate::embed::Encoder;
use crate::rcg::TripleStore;
use crate::{Error, Result};

/// Controls of the two-round first-stage retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RetrievalParams {
    /// Triples requested.
    pub k_u: usize,
    /// Minimum number of distinct tables wanted.
    pub k_t: usize,
    /// Size of the expanded second-round fetch.
    pub max_try_ku: usize,
    /// Per-table triple cap applied when squashing.
    pub per_table_cap: usize,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        RetrievalParams {
            k_u: 100,
            k_t: 5,
            max_try_ku: 1000,
            per_table_cap: 3,
        }
    }
}

impl RetrievalParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_u > self.max_try_ku || self.k_t == 0 || self.per_table_cap == 0 {
            return Err(Error::Config(format!("invalid retrieval params {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub triple_id: u64,
    pub table_id: String,
    pub score: f64,
    pub rank: usize,
}

fn distinct_tables(results: &[RetrievalResult]) -> usize {
    let mut seen: Vec<&str> = results.iter().map(|r| r.table_id.as_str()).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

fn rerank(mut results: Vec<RetrievalResult>) -> Vec<RetrievalResult> {
    results.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.triple_id.cmp(&b.triple_id))
    });
    for (i, r) in results.iter_mut().enumerate() {
        r.rank = i;
    }
    results
}

/// Reduces a ranked expanded fetch to at most `k_u` triples: tables are
/// ordered by their best triple, the first `k_t` tables are kept with at most
/// `per_table_cap` triples each, and any excess is trimmed from the lowest
/// ordered table upward (each table keeps its best triple until every kept
/// table is down to one).
pub fn squash(expanded: &[RetrievalResult], params: &RetrievalParams) -> Vec<RetrievalResult> {
    let mut ranked: Vec<&RetrievalResult> = expanded.iter().collect();
    ranked.sort_by_key(|r| r.rank);
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&RetrievalResult>> = HashMap::new();
    for r in ranked {
        let group = groups.entry(r.table_id.as_str()).or_insert_with(|| {
            order.push(r.table_id.as_str());
            Vec::new()
        });
        group.push(r);
    }
    order.truncate(params.k_t);
    let mut kept: Vec<Vec<&RetrievalResult>> = order
        .iter()
        .map(|t| {
            let mut g = groups.remove(t).unwrap_or_default();
            g.truncate(params.per_table_cap);
            g
        })
        .collect();
    let mut total: usize = kept.iter().map(Vec::len).sum();
    for g in kept.iter_mut().rev() {
        while total > params.k_u && g.len() > 1 {
            g.pop();
            total -= 1;
        }
    }
    while total > params.k_u {
        let last = kept.pop().expect("non-empty while over budget");
        total -= last.len();
    }
    rerank(kept.into_iter().flatten().cloned().collect())
}

/// Two-round retrieval over an arbitrary fetch function returning the top
/// `n` results in rank order.
pub fn two_round(
    mut fetch: impl FnMut(usize) -> Result<Vec<RetrievalResult>>,
    params: &RetrievalParams,
) -> Result<Vec<RetrievalResult>> {
    let first = fetch(params.k_u)?;
    if distinct_tables(&first) >= params.k_t {
        return Ok(first);
    }
    let expanded = fetch(params.max_try_ku)?;
    Ok(squash(&expanded, params))
}

fn attribute(hits: Vec<Hit>, triples: &TripleStore) -> Result<Vec<RetrievalResult>> {
    hits.into_iter()
        .enumerate()
        .map(|(rank, h)| {
            Ok(RetrievalResult {
                triple_id: h.triple_id,
                table_id: triples.try_get(h.triple_id)?.table_id.clone(),
                score: h.score,
                rank,
            })
        })
        .collect()
}

/// Encodes the question (dense indexes) and runs two-round retrieval.
pub fn two_round_retrieve(
    question: &str,
    encoder: &dyn Encoder,
    index: &FirstStageIndex,
    triples: &TripleStore,
    params: &RetrievalParams,
) -> Result<Vec<RetrievalResult>> {
    if question.trim().is_empty() {
        return Ok(Vec::new());
    }
    match index {
        FirstStageIndex::Sparse(sparse) => two_round(
            |k| attribute(sparse.search(question, k), triples),
            params,
        ),
        dense => {
            let q = encoder.encode_question(question)?;
            two_round(|k| attribute(dense.search_dense(&q, k)?, triples), params)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expanded(tables: &[&str]) -> Vec<RetrievalResult> {
        tables
            .iter()
            .enumerate()
            .map(|(i, t)| RetrievalResult {
                triple_id: i as u64 + 1,
                table_id: t.to_string(),
                score: 1.0 - i as f64 * 0.1,
                rank: i,
            })
            .collect()
    }

    fn params(k_u: usize, k_t: usize, m: usize) -> RetrievalParams {
        RetrievalParams {
            k_u,
            k_t,
            max_try_ku: 1000,
            per_table_cap: m,
        }
    }

    #[test]
    fn squash_hand_trace() {
        let out = squash(&expanded(&["A", "A", "A", "B", "B", "B", "C", "C"]), &params(4, 2, 2));
        let got: Vec<(u64, &str)> = out.iter().map(|r| (r.triple_id, r.table_id.as_str())).collect();
        assert_eq!(got, vec![(1, "A"), (2, "A"), (4, "B"), (5, "B")]);
        assert_eq!(out.iter().map(|r| r.rank).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn squash_trims_lowest_table_first() {
        // A:1,2,3 B:4,5,6 capped at 3 each = 6 > k_u = 4; B loses 6 and 5.
        let out = squash(&expanded(&["A", "A", "A", "B", "B", "B"]), &params(4, 2, 3));
        let ids: Vec<u64> = out.iter().map(|r| r.triple_id).collect();
        assert_eq!(ids, vec![1, 2, 3, 4]);
    }

    #[test]
    fn squash_single_table() {
        let out = squash(&expanded(&["A"; 10]), &params(5, 2, 3));
        assert_eq!(out.len(), 3);
        let out = squash(&expanded(&["A"; 10]), &params(2, 2, 3));
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn squash_drops_tables_when_k_t_exceeds_k_u() {
        let out = squash(&expanded(&["A", "B", "C", "D"]), &params(2, 4, 1));
        let tables: Vec<&str> = out.iter().map(|r| r.table_id.as_str()).collect();
        assert_eq!(tables, vec!["A", "B"]);
    }

    #[test]
    fn first_round_kept_when_constraint_met() {
        let all = expanded(&["A", "B", "C", "D", "E", "F"]);
        let mut calls = Vec::new();
        let out = two_round(
            |k| {
                calls.push(k);
                Ok(all.iter().take(k).cloned().collect())
            },
            &params(5, 5, 3),
        )
        .unwrap();
        assert_eq!(calls, vec![5]);
        assert_eq!(out, all[..5].to_vec());
    }

    #[test]
    fn second_round_squashes() {
        let all = expanded(&["A", "A", "A", "B", "B", "B", "C", "C"]);
        let mut calls = Vec::new();
        let p = RetrievalParams {
            max_try_ku: 8,
            ..params(4, 3, 2)
        };
        let out = two_round(
            |k| {
                calls.push(k);
                Ok(all.iter().take(k).cloned().collect())
            },
            &p,
        )
        .unwrap();
        assert_eq!(calls, vec![4, 8]);
        let ids: Vec<u64> = out.iter().map(|r| r.triple_id).collect();
        assert_eq!(ids, vec![1, 2, 4, 7]);
    }
}
