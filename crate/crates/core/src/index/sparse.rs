//! Okapi BM25 over triple retrieval texts.
//!
//! ```text
//! idf(t)     = ln(1 + (N - df + 0.5) / (df + 0.5))
//! score(q,d) = sum over distinct query terms t of
//!              idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{top_k, Hit};
use crate::text::word_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Inverted index of term frequencies with document lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseIndex {
    pub params: Bm25Params,
    pub(crate) doc_ids: Vec<u64>,
    pub(crate) doc_lens: Vec<u32>,
    pub(crate) postings: BTreeMap<String, Vec<Posting>>,
    pub(crate) avgdl: f64,
}

impl SparseIndex {
    pub fn build<'a>(docs: impl IntoIterator<Item = (u64, &'a str)>, params: Bm25Params) -> SparseIndex {
        let mut doc_ids = Vec::new();
        let mut doc_lens = Vec::new();
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (id, text) in docs {
            let doc = doc_ids.len() as u32;
            let tokens = word_tokens(text);
            doc_ids.push(id);
            doc_lens.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_insert(0) += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting { doc, tf: count });
            }
        }
        let total: u64 = doc_lens.iter().map(|&l| u64::from(l)).sum();
        let avgdl = if doc_ids.is_empty() {
            0.0
        } else {
            total as f64 / doc_ids.len() as f64
        };
        SparseIndex {
            params,
            doc_ids,
            doc_lens,
            postings,
            avgdl,
        }
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.len() as f64;
        let df = self.df(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    pub fn search(&self, query: &str, k: usize) -> Vec<Hit> {
        if self.is_empty() || k == 0 {
            return Vec::new();
        }
        let terms: BTreeSet<String> = word_tokens(query).into_iter().collect();
        let Bm25Params { k1, b } = self.params;
        let mut scores = vec![0f64; self.len()];
        let mut touched = vec![false; self.len()];
        for term in &terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(term);
            for p in list {
                let d = p.doc as usize;
                let tf = f64::from(p.tf);
                let dl = f64::from(self.doc_lens[d]);
                scores[d] += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / self.avgdl));
                touched[d] = true;
            }
        }
        let hits = scores
            .iter()
            .zip(&touched)
            .enumerate()
            .filter(|(_, (_, &t))| t)
            .map(|(d, (&score, _))| Hit {
                triple_id: self.doc_ids[d],
                score,
            })
            .collect();
        top_k(hits, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn df_matches_posting_length() {
        let idx = SparseIndex::build([(1, "a b a"), (2, "b c"), (3, "c")], Bm25Params::default());
        assert_eq!(idx.df("a"), 1);
        assert_eq!(idx.df("b"), 2);
        assert_eq!(idx.df("c"), 2);
        assert!((idx.avgdl() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_terms_return_nothing() {
        let idx = SparseIndex::build([(1, "alpha beta")], Bm25Params::default());
        assert!(idx.search("gamma", 5).is_empty());
        let hits = idx.search("alpha beta", 5);
        assert_eq!(hits.len(), 1);
        assert!(hits[0].score > 0.0);
    }
}
