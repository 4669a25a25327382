//! Feature rows for the relevance model and the instances built on them.

use std::collections::HashMap;

use tabdisc_core::embed::Vector;
use tabdisc_core::index::RetrievalResult;
use tabdisc_core::rcg::TripleStore;
use tabdisc_core::trainset::{augment, TrainingExample};
use tabdisc_model::relevance::{extract_features, Group, Instance, QuestionBatch};

use crate::{Error, Result};

/// Passage vectors of every triple, row-aligned with the triple store.
#[derive(Debug, Clone, PartialEq)]
pub struct PassageVectors {
    dim: usize,
    data: Vec<f32>,
    rows: HashMap<u64, usize>,
}

impl PassageVectors {
    pub fn new(dim: usize, data: Vec<f32>, store: &TripleStore) -> Result<PassageVectors> {
        if dim == 0 || data.len() != dim * store.len() {
            return Err(Error::Config(format!(
                "{} passage values do not fit {} triples of dim {dim}",
                data.len(),
                store.len()
            )));
        }
        let rows = store.iter().enumerate().map(|(i, t)| (t.triple_id, i)).collect();
        Ok(PassageVectors { dim, data, rows })
    }

    pub fn to_bytes(vectors: &[Vector]) -> Vec<u8> {
        vectors
            .iter()
            .flat_map(|v| v.values.iter().flat_map(|x| x.to_le_bytes()))
            .collect()
    }

    pub fn from_bytes(dim: usize, bytes: &[u8], store: &TripleStore) -> Result<PassageVectors> {
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        PassageVectors::new(dim, data, store)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, triple_id: u64) -> Result<&[f32]> {
        let row = *self
            .rows
            .get(&triple_id)
            .ok_or(tabdisc_core::Error::UnknownTriple(triple_id))?;
        Ok(&self.data[row * self.dim..(row + 1) * self.dim])
    }
}

fn feature_rows(q: &[f32], ids: &[u64], passages: &PassageVectors) -> Result<Vec<Vec<f32>>> {
    ids.iter()
        .map(|&id| Ok(extract_features(q, passages.get(id)?)?))
        .collect()
}

fn instance_of(e: &TrainingExample, row_of: &HashMap<u64, usize>) -> Instance {
    Instance {
        groups: e
            .groups
            .iter()
            .map(|g| Group {
                table_id: g.table_id.clone(),
                rows: g.triples.iter().map(|t| row_of[&t.triple_id]).collect(),
                label: g.label.is_positive(),
            })
            .collect(),
    }
}

/// One feature row per retrieved triple; the original example is the first
/// instance, followed by its augmented variants when `augmented` is set.
pub fn question_batch(
    e: &TrainingExample,
    question: &Vector,
    passages: &PassageVectors,
    augmented: bool,
) -> Result<QuestionBatch> {
    let ids: Vec<u64> = e.groups.iter().flat_map(|g| g.triples.iter().map(|t| t.triple_id)).collect();
    let row_of: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let instances = if augmented {
        augment(e).iter().map(|v| instance_of(v, &row_of)).collect()
    } else {
        vec![instance_of(e, &row_of)]
    };
    Ok(QuestionBatch {
        question_id: e.question_id.clone(),
        features: feature_rows(&question.values, &ids, passages)?,
        instances,
    })
}

/// Unlabeled instance over a retrieval, grouped by table in rank order.
/// Returns the triple id of every feature row alongside.
pub fn query_instance(
    retrieval: &[RetrievalResult],
    question: &Vector,
    passages: &PassageVectors,
) -> Result<(Vec<u64>, Vec<Vec<f32>>, Instance)> {
    let mut ranked: Vec<&RetrievalResult> = retrieval.iter().collect();
    ranked.sort_by_key(|r| r.rank);
    let mut groups: Vec<Group> = Vec::new();
    let mut ids = Vec::with_capacity(ranked.len());
    for (row, r) in ranked.iter().enumerate() {
        ids.push(r.triple_id);
        match groups.iter_mut().find(|g| g.table_id == r.table_id) {
            Some(g) => g.rows.push(row),
            None => groups.push(Group {
                table_id: r.table_id.clone(),
                rows: vec![row],
                label: false,
            }),
        }
    }
    let features = feature_rows(&question.values, &ids, passages)?;
    Ok((ids, features, Instance { groups }))
}
