//! Labeled ranking examples built from first-stage retrieval of synthetic
//! questions, representation augmentation and incremental dataset chunks.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::EncoderSpec;
use crate::index::{IndexKind, RetrievalParams, RetrievalResult};
use crate::qgen::QuestionRecord;
use crate::text::sha256_hex;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredTriple {
    pub triple_id: u64,
    pub score: f64,
}

/// Retrieved triples of one table with the table's label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledGroup {
    pub table_id: String,
    pub triples: Vec<ScoredTriple>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub question_id: String,
    pub question: String,
    pub groups: Vec<LabeledGroup>,
    #[serde(default)]
    pub augmented: bool,
}

impl TrainingExample {
    pub fn triple_count(&self) -> usize {
        self.groups.iter().map(|g| g.triples.len()).sum()
    }

    pub fn has_both_labels(&self) -> bool {
        self.groups.iter().any(|g| g.label.is_positive())
            && self.groups.iter().any(|g| !g.label.is_positive())
    }
}

/// Groups retrieved triples by table (in order of first appearance) and
/// labels each group by ground-truth membership. Returns `None` when every
/// group carries the same label, including empty retrievals.
pub fn collect_example(q: &QuestionRecord, retrieval: &[RetrievalResult]) -> Option<TrainingExample> {
    let mut ranked: Vec<&RetrievalResult> = retrieval.iter().collect();
    ranked.sort_by_key(|r| r.rank);
    let mut groups: Vec<LabeledGroup> = Vec::new();
    for r in ranked {
        let triple = ScoredTriple {
            triple_id: r.triple_id,
            score: r.score,
        };
        match groups.iter_mut().find(|g| g.table_id == r.table_id) {
            Some(g) => g.triples.push(triple),
            None => groups.push(LabeledGroup {
                table_id: r.table_id.clone(),
                triples: vec![triple],
                label: if q.ground_truth_table_ids.contains(&r.table_id) {
                    Label::Positive
                } else {
                    Label::Negative
                },
            }),
        }
    }
    let example = TrainingExample {
        question_id: q.question_id.clone(),
        question: q.question.clone(),
        groups,
        augmented: false,
    };
    example.has_both_labels().then_some(example)
}

/// The example itself followed by one variant per triple in which that
/// triple's table is reduced to the triple alone.
pub fn augment(e: &TrainingExample) -> Vec<TrainingExample> {
    let mut out = Vec::with_capacity(1 + e.triple_count());
    out.push(e.clone());
    for (gi, group) in e.groups.iter().enumerate() {
        for triple in &group.triples {
            let mut variant = e.clone();
            variant.groups[gi].triples = vec![*triple];
            variant.augmented = true;
            out.push(variant);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementalDataset {
    pub index: usize,
    pub train: Vec<TrainingExample>,
    pub validation: Vec<TrainingExample>,
}

impl IncrementalDataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn question_ids(&self) -> BTreeSet<&str> {
        self.train
            .iter()
            .chain(&self.validation)
            .map(|e| e.question_id.as_str())
            .collect()
    }

    /// jsonl with one `{split, example}` record per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (split, examples) in [("train", &self.train), ("validation", &self.validation)] {
            for e in examples {
                let line = serde_json::json!({ "split": split, "example": e });
                writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, index: usize) -> Result<IncrementalDataset> {
        #[derive(Deserialize)]
        struct Line {
            split: String,
            example: TrainingExample,
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut ds = IncrementalDataset {
            index,
            train: Vec::new(),
            validation: Vec::new(),
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let rec: Line = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
            match rec.split.as_str() {
                "train" => ds.train.push(rec.example),
                "validation" => ds.validation.push(rec.example),
                other => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        message: format!("unknown split `{other}`"),
                    })
                }
            }
        }
        Ok(ds)
    }
}

/// Runs retrieval for every record in parallel and keeps accepted examples
/// in record order.
pub fn collect_examples<F>(records: &[QuestionRecord], retrieve: F) -> Result<Vec<TrainingExample>>
where
    F: Fn(&str) -> Result<Vec<RetrievalResult>> + Sync,
{
    let results: Vec<Result<Option<TrainingExample>>> = records
        .par_iter()
        .map(|q| Ok(collect_example(q, &retrieve(&q.question)?)))
        .collect();
    let mut out = Vec::new();
    for r in results {
        if let Some(e) = r? {
            out.push(e);
        }
    }
    Ok(out)
}

fn validation_size(size: usize) -> usize {
    if size < 2 {
        return 0;
    }
    ((size as f64 * 0.1).round() as usize).clamp(1, size - 1)
}

/// Splits accepted examples into `count` consecutive datasets of `size`
/// questions, each with a seeded 90/10 train/validation split.
pub fn partition_datasets(
    examples: Vec<TrainingExample>,
    count: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<IncrementalDataset>> {
    let needed = count * size;
    if examples.len() < needed {
        return Err(Error::Shortfall {
            needed,
            available: examples.len(),
            missing: needed - examples.len(),
        });
    }
    let mut iter = examples.into_iter();
    (0..count)
        .map(|index| {
            let mut chunk: Vec<TrainingExample> = iter.by_ref().take(size).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
            chunk.shuffle(&mut rng);
            let validation = chunk.split_off(size - validation_size(size));
            Ok(IncrementalDataset {
                index,
                train: chunk,
                validation,
            })
        })
        .collect()
}

/// Collects examples by retrieval and partitions them into datasets.
pub fn build_incremental_datasets<F>(
    records: &[QuestionRecord],
    retrieve: F,
    count: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<IncrementalDataset>>
where
    F: Fn(&str) -> Result<Vec<RetrievalResult>> + Sync,
{
    let examples = collect_examples(records, retrieve)?;
    partition_datasets(examples, count, size, seed)
}

/// Everything that determines which triples a question retrieves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub params: RetrievalParams,
    pub encoder: EncoderSpec,
    pub index_kind: IndexKind,
    pub nprobe: Option<usize>,
}

impl RetrievalConfig {
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("retrieval config serializes"))
    }
}

/// Manifest stored next to dataset files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub retrieval: RetrievalConfig,
    pub retrieval_hash: String,
    pub corpus_checksum: String,
    pub datasets: Vec<DatasetEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub file: String,
    pub train: usize,
    pub validation: usize,
    pub checksum: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qgen::Provenance;

    fn record(gt: &[&str]) -> QuestionRecord {
        QuestionRecord {
            question_id: "q1".into(),
            question: "what?".into(),
            sql_id: "s1".into(),
            ground_truth_table_ids: gt.iter().map(|s| s.to_string()).collect(),
            provenance: Provenance::Template,
        }
    }

    fn retrieval(tables: &[&str]) -> Vec<RetrievalResult> {
        tables
            .iter()
            .enumerate()
            .map(|(i, t)| RetrievalResult {
                triple_id: 100 + i as u64,
                table_id: t.to_string(),
                score: 10.0 - i as f64,
                rank: i,
            })
            .collect()
    }

    #[test]
    fn grouping_and_labels() {
        let e = collect_example(&record(&["GT"]), &retrieval(&["GT", "X", "GT", "X", "X"])).unwrap();
        assert_eq!(e.groups.len(), 2);
        assert_eq!(e.groups[0].table_id, "GT");
        assert_eq!(e.groups[0].label, Label::Positive);
        assert_eq!(e.groups[0].triples.len(), 2);
        assert_eq!(e.groups[1].label, Label::Negative);
        assert_eq!(e.groups[1].triples.len(), 3);
    }

    #[test]
    fn single_label_is_skipped() {
        assert!(collect_example(&record(&["GT"]), &retrieval(&["GT", "GT"])).is_none());
        assert!(collect_example(&record(&["GT"]), &retrieval(&["X", "Y"])).is_none());
        assert!(collect_example(&record(&["GT"]), &[]).is_none());
    }

    #[test]
    fn augmentation_counts_and_labels() {
        let e = collect_example(&record(&["A"]), &retrieval(&["A", "B", "A"])).unwrap();
        let variants = augment(&e);
        assert_eq!(variants.len(), 4);
        assert_eq!(variants[0], e);
        for v in &variants[1..] {
            assert!(v.augmented);
            assert!(v.has_both_labels());
            for (g, src) in v.groups.iter().zip(&e.groups) {
                assert_eq!(g.label, src.label);
            }
        }
        // singleton tables are unchanged by restriction
        let e = collect_example(&record(&["A"]), &retrieval(&["A", "B"])).unwrap();
        for v in &augment(&e)[1..] {
            assert_eq!(v.groups, e.groups);
        }
    }

    fn examples(n: usize) -> Vec<TrainingExample> {
        (0..n)
            .map(|i| TrainingExample {
                question_id: format!("q{i}"),
                question: String::new(),
                groups: vec![],
                augmented: false,
            })
            .collect()
    }

    #[test]
    fn partitions_are_disjoint_and_seeded() {
        let ds = partition_datasets(examples(2000), 2, 1000, 9).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!((ds[0].train.len(), ds[0].validation.len()), (900, 100));
        assert!(ds[0].question_ids().is_disjoint(&ds[1].question_ids()));
        assert_eq!(ds, partition_datasets(examples(2000), 2, 1000, 9).unwrap());
        match partition_datasets(examples(1500), 2, 1000, 9) {
            Err(Error::Shortfall { missing, .. }) => assert_eq!(missing, 500),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dataset_file_round_trip() {
        let ds = partition_datasets(examples(20), 1, 20, 1).unwrap().remove(0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        ds.save(&path).unwrap();
        assert_eq!(IncrementalDataset::load(&path, 0).unwrap(), ds);
    }
}
