//! File names inside the artifact root and verified loaders for them.

use std::path::Path;

use serde::de::DeserializeOwned;
use tabdisc_core::corpus::TableCollection;
use tabdisc_core::qgen::QuestionRecord;
use tabdisc_core::rcg::TripleStore;
use tabdisc_core::sqlgen::SqlRecord;

use crate::artifacts::{Artifacts, Stage};
use crate::features::PassageVectors;
use crate::{Error, Result};

pub const COLLECTION: &str = "corpus/collection.json";
pub const INGEST_REPORT: &str = "corpus/ingest_report.json";
pub const TRIPLES: &str = "triples/triples.bin";
pub const TRIPLES_SIDECAR: &str = "triples/triples.bin.jsonl";
pub const PASSAGES: &str = "triples/passages.bin";
pub const INDEX_DIR: &str = "index/first_stage";
pub const SQLS: &str = "questions/sql.jsonl";
pub const SQL_DICT: &str = "questions/sql_dict.txt";
pub const TRAIN_QUESTIONS: &str = "questions/train.jsonl";
pub const HELD_OUT_QUESTIONS: &str = "questions/held_out.jsonl";
pub const EXTRA_QUESTIONS: &str = "datasets/extra_questions.jsonl";
pub const DATASET_MANIFEST: &str = "datasets/datasets.json";
pub const MODEL_DIR: &str = "checkpoints/model";
pub const TRAINING_REPORT: &str = "checkpoints/training.json";
pub const EVAL_REPORT: &str = "reports/eval.json";
pub const TIMING_REPORT: &str = "reports/timing.json";

pub fn dataset_file(index: usize) -> String {
    format!("datasets/dataset_{index:02}.jsonl")
}

pub fn to_jsonl<T: serde::Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("record serializes");
        out.push(b'\n');
    }
    out
}

pub fn from_jsonl<T: DeserializeOwned>(bytes: &[u8], origin: &Path) -> Result<Vec<T>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn from_json<T: DeserializeOwned>(bytes: &[u8], origin: &Path) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_collection(art: &Artifacts) -> Result<TableCollection> {
    let bytes = art.read_verified(Stage::Prepare, COLLECTION)?;
    from_json(&bytes, &art.path(COLLECTION))
}

pub fn load_triples(art: &Artifacts) -> Result<TripleStore> {
    art.read_verified(Stage::Triples, TRIPLES)?;
    Ok(TripleStore::load(&art.path(TRIPLES))?)
}

pub fn load_passages(art: &Artifacts, dim: usize, store: &TripleStore) -> Result<PassageVectors> {
    let bytes = art.read_verified(Stage::Encode, PASSAGES)?;
    PassageVectors::from_bytes(dim, &bytes, store)
}

pub fn load_sqls(art: &Artifacts) -> Result<Vec<SqlRecord>> {
    from_jsonl(&art.read_verified(Stage::GenSql, SQLS)?, &art.path(SQLS))
}

pub fn load_questions(art: &Artifacts, stage: Stage, rel: &str) -> Result<Vec<QuestionRecord>> {
    from_jsonl(&art.read_verified(stage, rel)?, &art.path(rel))
}
