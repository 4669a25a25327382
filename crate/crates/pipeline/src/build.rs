//! Offline mode: the staged build from raw tables to a trained ranker.
//!
//! Stages run in dependency order and are skipped when their manifest
//! record is fresh, so an interrupted build resumes at the first stale
//! stage and a completed build reruns as a no-op.

use std::collections::BTreeMap;
use std::fs;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tabdisc_core::corpus::{ingest_tables, schema_duplicate_groups, DuplicateGroups, IngestReport, TableCollection};
use tabdisc_core::embed::{build_encoder, Encoder, Vector};
use tabdisc_core::index::{build_exact, build_ivf, two_round_retrieve, FirstStageIndex, IndexKind, SparseIndex};
use tabdisc_core::qgen::{assign_ground_truth, external_translate, template_translate, Provenance, QuestionRecord};
use tabdisc_core::rcg::{build_collection_triples, retrieval_text, TripleStore};
use tabdisc_core::sqlgen::{SqlDict, SqlGenerator, SqlRecord};
use tabdisc_core::trainset::{collect_examples, partition_datasets, DatasetEntry, DatasetManifest, IncrementalDataset, TrainingExample};
use tabdisc_model::bayes::incremental_loop;
use tabdisc_model::checkpoint::{save_params, save_posterior, CheckpointMeta};
use tabdisc_model::relevance::{precision_at_1, simple_incremental, QuestionBatch};
use tabdisc_model::stopping::CostReport;

use crate::artifacts::{json_hash, sha256_hex, Artifacts, Freshness, Outputs, Stage, StageRecord};
use crate::config::{CorpusConfig, PipelineConfig, TrainerKind};
use crate::engine::Engine;
use crate::eval::evaluate;
use crate::features::{question_batch, PassageVectors};
use crate::layout::{self, from_json, to_jsonl};
use crate::synth::synthetic_collection;
use crate::timing::timing_report;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: Stage,
    /// `false` when the stage was already fresh.
    pub ran: bool,
    pub seconds: f64,
}

/// Written by the train stage next to the checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub trainer: TrainerKind,
    pub best_eval: f64,
    /// Datasets folded into the final model.
    pub accepted: Vec<usize>,
    pub cost: CostReport,
}

type StageResult = Result<(Outputs, BTreeMap<String, u64>)>;

pub struct Pipeline {
    cfg: PipelineConfig,
    art: Artifacts,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Pipeline> {
        cfg.validate()?;
        let art = Artifacts::new(&cfg.out_dir);
        Ok(Pipeline { cfg, art })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn artifacts(&self) -> &Artifacts {
        &self.art
    }

    /// Runs `target` and everything it depends on, skipping fresh stages.
    pub fn run_until(&self, target: Stage) -> Result<Vec<StageOutcome>> {
        let mut needed = vec![target];
        let mut i = 0;
        while i < needed.len() {
            for &d in needed[i].deps() {
                if !needed.contains(&d) {
                    needed.push(d);
                }
            }
            i += 1;
        }
        let mut outcomes = Vec::new();
        for stage in Stage::ALL.into_iter().filter(|s| needed.contains(s)) {
            outcomes.push(self.run_stage(stage)?);
        }
        Ok(outcomes)
    }

    /// Steps through training; checkpoints and manifests are persisted.
    pub fn offline_build(&self) -> Result<Vec<StageOutcome>> {
        self.run_until(Stage::Train)
    }

    pub fn run_all(&self) -> Result<Vec<StageOutcome>> {
        self.run_until(Stage::Eval)
    }

    fn expected_inputs(&self, stage: Stage) -> Result<BTreeMap<String, String>> {
        let mut inputs = self.art.inputs(stage)?;
        if stage == Stage::Prepare {
            if let CorpusConfig::Files { path, .. } = &self.cfg.corpus {
                inputs.insert("source".into(), source_digest(path)?);
            }
        }
        Ok(inputs)
    }

    /// Runs one stage unless it is fresh. Dependencies must be fresh.
    pub fn run_stage(&self, stage: Stage) -> Result<StageOutcome> {
        let config_hash = json_hash(&stage.config_slice(&self.cfg));
        let inputs = self.expected_inputs(stage)?;
        if self.art.freshness(stage, &config_hash, &inputs)? == Freshness::Fresh {
            tracing::info!(stage = stage.name(), "up to date");
            return Ok(StageOutcome {
                stage,
                ran: false,
                seconds: 0.0,
            });
        }
        tracing::info!(stage = stage.name(), "running");
        let started = Instant::now();
        let result = match stage {
            Stage::Prepare => self.prepare(),
            Stage::Triples => self.triples(),
            Stage::Encode => self.encode(),
            Stage::Index => self.index(),
            Stage::GenSql => self.gen_sql(),
            Stage::GenQuestions => self.gen_questions(),
            Stage::Collect => self.collect(),
            Stage::Train => self.train(),
            Stage::Eval => self.eval(),
        };
        let (outputs, counts) = result.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
            partial: self.art.present_files(stage),
        })?;
        let seconds = started.elapsed().as_secs_f64();
        let record = StageRecord {
            config_hash,
            inputs,
            outputs: outputs.into_map(),
            counts,
            seconds,
        };
        self.art.write_record(stage, &self.cfg, record)?;
        Ok(StageOutcome {
            stage,
            ran: true,
            seconds,
        })
    }

    fn encoder(&self) -> Result<Box<dyn Encoder>> {
        Ok(build_encoder(&self.cfg.encoder)?)
    }

    fn prepare(&self) -> StageResult {
        let (collection, report) = match &self.cfg.corpus {
            CorpusConfig::Files { path, format } => ingest_tables(path, *format)?,
            CorpusConfig::Synthetic { tables, .. } => {
                let seed = self.cfg.synthetic_seed().expect("synthetic corpus has a seed");
                let c = synthetic_collection(*tables, seed)?;
                let report = IngestReport {
                    tables: c.len(),
                    ..IngestReport::default()
                };
                (c, report)
            }
        };
        let mut out = Outputs::default();
        out.write(&self.art, layout::COLLECTION, collection.to_json().as_bytes())?;
        out.write(
            &self.art,
            layout::INGEST_REPORT,
            serde_json::to_string_pretty(&report).expect("report serializes").as_bytes(),
        )?;
        let rows: usize = collection.tables().map(|t| t.n_rows()).sum();
        Ok((out, counts([("tables", collection.len()), ("rows", rows)])))
    }

    fn triples(&self) -> StageResult {
        let collection = layout::load_collection(&self.art)?;
        let store = build_collection_triples(&collection);
        let path = self.art.path(layout::TRIPLES);
        fs::create_dir_all(path.parent().expect("nested path")).map_err(|e| Error::io(&path, e))?;
        store.save(&path)?;
        let mut out = Outputs::default();
        out.track(&self.art, layout::TRIPLES)?;
        out.track(&self.art, layout::TRIPLES_SIDECAR)?;
        Ok((out, counts([("triples", store.len())])))
    }

    fn encode(&self) -> StageResult {
        let collection = layout::load_collection(&self.art)?;
        let store = layout::load_triples(&self.art)?;
        let texts = passage_texts(&collection, &store);
        let vectors = self.encoder()?.encode_passages(&texts)?;
        let mut out = Outputs::default();
        out.write(&self.art, layout::PASSAGES, &PassageVectors::to_bytes(&vectors))?;
        Ok((out, counts([("vectors", vectors.len()), ("dim", self.cfg.encoder.dim)])))
    }

    fn index(&self) -> StageResult {
        let store = layout::load_triples(&self.art)?;
        let ids: Vec<u64> = store.iter().map(|t| t.triple_id).collect();
        let index = match self.cfg.index.kind {
            IndexKind::Bm25 => {
                let collection = layout::load_collection(&self.art)?;
                let texts = passage_texts(&collection, &store);
                FirstStageIndex::Sparse(SparseIndex::build(
                    ids.iter().copied().zip(texts.iter().map(String::as_str)),
                    self.cfg.index.bm25,
                ))
            }
            kind => {
                let passages = layout::load_passages(&self.art, self.cfg.encoder.dim, &store)?;
                let vectors: Vec<Vector> = ids
                    .iter()
                    .map(|&id| Ok(Vector::from(passages.get(id)?.to_vec())))
                    .collect::<Result<_>>()?;
                if kind == IndexKind::Exact {
                    FirstStageIndex::Exact(build_exact(&vectors, &ids)?)
                } else {
                    let n_clusters = self.cfg.index.n_clusters.min(vectors.len().max(1));
                    let mut ivf = build_ivf(&vectors, &ids, n_clusters, self.cfg.seed)?;
                    ivf.nprobe = self.cfg.index.nprobe.min(ivf.n_clusters()).max(1);
                    FirstStageIndex::Ivf(ivf)
                }
            }
        };
        let dir = self.art.path(layout::INDEX_DIR);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        let manifest = index.save(&dir)?;
        let mut out = Outputs::default();
        out.track(&self.art, &format!("{}/manifest.json", layout::INDEX_DIR))?;
        for name in manifest.checksums.keys() {
            out.track(&self.art, &format!("{}/{name}", layout::INDEX_DIR))?;
        }
        Ok((out, counts([("vectors", index.len())])))
    }

    fn gen_sql(&self) -> StageResult {
        let collection = layout::load_collection(&self.art)?;
        let mut dict = SqlDict::default();
        let cfg = self.cfg.gen_config(self.cfg.sqlgen.initial, self.cfg.seed);
        let queries = SqlGenerator::new(&collection, cfg).next_batch(&mut dict)?;
        let records = sql_records(&collection, queries);
        let mut out = Outputs::default();
        out.write(&self.art, layout::SQLS, &to_jsonl(&records))?;
        dict.save(&self.art.path(layout::SQL_DICT))?;
        out.track(&self.art, layout::SQL_DICT)?;
        Ok((out, counts([("sqls", records.len())])))
    }

    fn gen_questions(&self) -> StageResult {
        let collection = layout::load_collection(&self.art)?;
        let sqls = layout::load_sqls(&self.art)?;
        let held_out = self.cfg.questions.held_out;
        if held_out >= sqls.len() {
            return Err(Error::Config(format!(
                "{held_out} held-out questions leave none of {} for training",
                sqls.len()
            )));
        }
        let groups = schema_duplicate_groups(&collection);
        let records = self.translate(&collection, &groups, &sqls)?;
        let (eval, train) = records.split_at(held_out);
        let mut out = Outputs::default();
        out.write(&self.art, layout::HELD_OUT_QUESTIONS, &to_jsonl(eval))?;
        out.write(&self.art, layout::TRAIN_QUESTIONS, &to_jsonl(train))?;
        let external = records.iter().filter(|r| r.provenance == Provenance::External).count();
        Ok((
            out,
            counts([
                ("questions", records.len()),
                ("held_out", eval.len()),
                ("external", external),
            ]),
        ))
    }

    fn translate(
        &self,
        collection: &TableCollection,
        groups: &DuplicateGroups,
        sqls: &[SqlRecord],
    ) -> Result<Vec<QuestionRecord>> {
        let table = |s: &SqlRecord| collection.get(&s.table_id).ok_or_else(|| tabdisc_core::Error::UnknownTable(s.table_id.clone()));
        let template = |s: &SqlRecord| -> Result<String> {
            let seed = u64::from_str_radix(&s.sql_id, 16).unwrap_or(0);
            Ok(template_translate(&s.query, table(s)?, seed))
        };
        let questions: Vec<(String, Provenance)> = match &self.cfg.questions.translator {
            None => sqls
                .iter()
                .map(|s| Ok((template(s)?, Provenance::Template)))
                .collect::<Result<_>>()?,
            Some(tcfg) => {
                let fallback: Vec<String> = sqls.iter().map(template).collect::<Result<_>>()?;
                let texts: Vec<String> = sqls.iter().map(|s| s.canonical_text.clone()).collect();
                external_translate(&texts, tcfg, |i| fallback[i].clone())?
                    .into_iter()
                    .map(|t| (t.question, t.provenance))
                    .collect()
            }
        };
        Ok(sqls
            .iter()
            .zip(questions)
            .map(|(s, (question, provenance))| QuestionRecord {
                question_id: format!("q-{}", s.sql_id),
                question,
                sql_id: s.sql_id.clone(),
                ground_truth_table_ids: assign_ground_truth(&s.query, groups),
                provenance,
            })
            .collect())
    }

    fn collect(&self) -> StageResult {
        let collection = layout::load_collection(&self.art)?;
        let store = layout::load_triples(&self.art)?;
        let index = self.load_index()?;
        let encoder = self.encoder()?;
        let params = self.cfg.retrieval;
        let retrieve = |q: &str| two_round_retrieve(q, encoder.as_ref(), &index, &store, &params);
        let records = layout::load_questions(&self.art, Stage::GenQuestions, layout::TRAIN_QUESTIONS)?;
        let dict_bytes = self.art.read_verified(Stage::GenSql, layout::SQL_DICT)?;
        let mut dict = SqlDict::default();
        for line in String::from_utf8_lossy(&dict_bytes).lines().filter(|l| !l.is_empty()) {
            dict.insert(line.to_owned());
        }

        let needed = self.cfg.datasets.count * self.cfg.datasets.size;
        let mut retrieved = records.len();
        let mut examples = collect_examples(&records, retrieve)?;
        let groups = schema_duplicate_groups(&collection);
        let mut extra: Vec<QuestionRecord> = Vec::new();
        let mut rounds = 0;
        while examples.len() < needed && rounds < self.cfg.datasets.max_rounds {
            rounds += 1;
            let acceptance = (examples.len() as f64 / retrieved.max(1) as f64).max(0.1);
            let missing = needed - examples.len();
            let batch = (missing as f64 / acceptance * 1.25).ceil() as usize + 8;
            let seed = self.cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(rounds as u64));
            tracing::info!(round = rounds, missing, batch, "requesting more questions");
            let queries = match SqlGenerator::new(&collection, self.cfg.gen_config(batch, seed)).next_batch(&mut dict) {
                Ok(q) => q,
                Err(tabdisc_core::Error::Exhausted { partial, .. }) => partial,
                Err(e) => return Err(e.into()),
            };
            if queries.is_empty() {
                break;
            }
            let new = self.translate(&collection, &groups, &sql_records(&collection, queries))?;
            retrieved += new.len();
            examples.extend(collect_examples(&new, retrieve)?);
            extra.extend(new);
        }
        let accepted = examples.len();
        let datasets = partition_datasets(examples, self.cfg.datasets.count, self.cfg.datasets.size, self.cfg.seed)?;

        let mut out = Outputs::default();
        out.write(&self.art, layout::EXTRA_QUESTIONS, &to_jsonl(&extra))?;
        let mut entries = Vec::with_capacity(datasets.len());
        for ds in &datasets {
            let rel = layout::dataset_file(ds.index);
            ds.save(&self.art.path(&rel))?;
            out.track(&self.art, &rel)?;
            let bytes = fs::read(self.art.path(&rel)).map_err(|e| Error::io(self.art.path(&rel), e))?;
            entries.push(DatasetEntry {
                file: rel,
                train: ds.train.len(),
                validation: ds.validation.len(),
                checksum: sha256_hex(&bytes),
            });
        }
        let retrieval = self.cfg.retrieval_config();
        let manifest = DatasetManifest {
            retrieval_hash: retrieval.hash(),
            retrieval,
            corpus_checksum: self.art.require(Stage::Prepare)?.outputs[layout::COLLECTION].clone(),
            datasets: entries,
        };
        out.write(
            &self.art,
            layout::DATASET_MANIFEST,
            serde_json::to_string_pretty(&manifest).expect("manifest serializes").as_bytes(),
        )?;
        Ok((
            out,
            counts([
                ("questions_retrieved", retrieved),
                ("accepted", accepted),
                ("rounds", rounds),
                ("extra_questions", extra.len()),
            ]),
        ))
    }

    fn load_index(&self) -> Result<FirstStageIndex> {
        let record = self.art.require(Stage::Index)?;
        self.art.verify(Stage::Index, &record)?;
        Ok(FirstStageIndex::load(&self.art.path(layout::INDEX_DIR))?)
    }

    /// Loads the incremental datasets recorded by the collect stage.
    pub fn load_datasets(&self) -> Result<Vec<IncrementalDataset>> {
        let bytes = self.art.read_verified(Stage::Collect, layout::DATASET_MANIFEST)?;
        let manifest: DatasetManifest = from_json(&bytes, &self.art.path(layout::DATASET_MANIFEST))?;
        manifest
            .datasets
            .iter()
            .enumerate()
            .map(|(i, entry)| {
                self.art.read_verified(Stage::Collect, &entry.file)?;
                Ok(IncrementalDataset::load(&self.art.path(&entry.file), i)?)
            })
            .collect()
    }

    /// Training batches per dataset (augmented) and the validation batches
    /// of all datasets (not augmented).
    pub fn training_batches(&self) -> Result<(Vec<Vec<QuestionBatch>>, Vec<QuestionBatch>)> {
        let store = layout::load_triples(&self.art)?;
        let passages = layout::load_passages(&self.art, self.cfg.encoder.dim, &store)?;
        let datasets = self.load_datasets()?;
        let encoder = self.encoder()?;
        let batches = |examples: &[TrainingExample], augmented: bool| -> Result<Vec<QuestionBatch>> {
            let texts: Vec<String> = examples.iter().map(|e| e.question.clone()).collect();
            let vectors = encoder.encode_questions(&texts)?;
            examples
                .iter()
                .zip(&vectors)
                .map(|(e, q)| question_batch(e, q, &passages, augmented))
                .collect()
        };
        let mut train = Vec::with_capacity(datasets.len());
        let mut validation = Vec::new();
        for ds in &datasets {
            train.push(batches(&ds.train, true)?);
            validation.extend(batches(&ds.validation, false)?);
        }
        Ok((train, validation))
    }

    fn train(&self) -> StageResult {
        let (train, validation) = self.training_batches()?;
        let rcfg = self.cfg.relevance_config();
        let eval = |p: &tabdisc_model::relevance::ModelParams| precision_at_1(p, &validation);
        let collect_record = self.art.require(Stage::Collect)?;
        let meta = |best: f64| CheckpointMeta {
            config: serde_json::json!({
                "relevance": rcfg,
                "bayes": self.cfg.bayes_config(),
                "trainer": self.cfg.trainer,
            }),
            seed: self.cfg.seed,
            dataset_hashes: collect_record.outputs.values().cloned().collect(),
            eval: Some(best),
        };
        let dir = self.art.path(layout::MODEL_DIR);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        let (report, checkpoint) = match self.cfg.trainer {
            TrainerKind::Simple => {
                let out = simple_incremental(&train, &rcfg, self.cfg.bayes.dataset_patience, eval)?;
                let m = save_params(&dir, &out.params, &meta(out.best_eval))?;
                let report = TrainingReport {
                    trainer: TrainerKind::Simple,
                    best_eval: out.best_eval,
                    accepted: out.accepted,
                    cost: out.cost,
                };
                (report, m)
            }
            TrainerKind::Bayesian => {
                let out = incremental_loop(&train, &rcfg, &self.cfg.bayes_config(), eval)?;
                let m = save_posterior(&dir, &out.best.params, &meta(out.best.eval))?;
                let report = TrainingReport {
                    trainer: TrainerKind::Bayesian,
                    best_eval: out.best.eval,
                    accepted: out.best.datasets,
                    cost: out.cost,
                };
                (report, m)
            }
        };
        let mut out = Outputs::default();
        out.track(&self.art, &format!("{}/manifest.json", layout::MODEL_DIR))?;
        for name in checkpoint.checksums.keys() {
            out.track(&self.art, &format!("{}/{name}", layout::MODEL_DIR))?;
        }
        out.write(
            &self.art,
            layout::TRAINING_REPORT,
            serde_json::to_string_pretty(&report).expect("report serializes").as_bytes(),
        )?;
        let steps = report.cost.total_presentations() as usize;
        Ok((
            out,
            counts([("steps", steps), ("epochs", report.cost.total_epochs())]),
        ))
    }

    fn eval(&self) -> StageResult {
        let engine = Engine::load(&self.cfg)?;
        let records = layout::load_questions(&self.art, Stage::GenQuestions, layout::HELD_OUT_QUESTIONS)?;
        let report = evaluate(&engine, &records, &self.cfg.online.eval_ks)?;
        let mut out = Outputs::default();
        out.write(&self.art, layout::EVAL_REPORT, report.to_json().as_bytes())?;
        let timing = timing_report(&self.art, &report.timing)?;
        out.write(
            &self.art,
            layout::TIMING_REPORT,
            serde_json::to_string_pretty(&timing).expect("timing serializes").as_bytes(),
        )?;
        Ok((out, counts([("questions", records.len())])))
    }
}

fn counts<const N: usize>(items: [(&str, usize); N]) -> BTreeMap<String, u64> {
    items.into_iter().map(|(k, v)| (k.to_owned(), v as u64)).collect()
}

fn passage_texts(collection: &TableCollection, store: &TripleStore) -> Vec<String> {
    store
        .iter()
        .map(|t| retrieval_text(t, collection.get(&t.table_id).expect("triple table exists")))
        .collect()
}

fn sql_records(collection: &TableCollection, queries: Vec<tabdisc_core::sqlgen::SqlQuery>) -> Vec<SqlRecord> {
    queries
        .into_iter()
        .map(|q| {
            let table = collection.get(&q.table_id).expect("sampled table exists");
            SqlRecord::new(q, table)
        })
        .collect()
}

fn source_digest(path: &std::path::Path) -> Result<String> {
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .flatten()
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        let mut parts = Vec::with_capacity(files.len());
        for f in files {
            let bytes = fs::read(&f).map_err(|e| Error::io(&f, e))?;
            parts.push((f.file_name().map(|n| n.to_string_lossy().into_owned()), sha256_hex(&bytes)));
        }
        Ok(json_hash(&parts))
    } else {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(sha256_hex(&bytes))
    }
}
