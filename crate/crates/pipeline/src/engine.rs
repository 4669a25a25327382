//! Online mode: loaded artifacts answering questions with ranked tables.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tabdisc_core::corpus::{Table, TableCollection};
use tabdisc_core::embed::{build_encoder, Encoder};
use tabdisc_core::index::{two_round_retrieve, FirstStageIndex, IndexKind};
use tabdisc_core::rcg::{retrieval_text, TripleStore};
use tabdisc_model::bayes::{averaged_probabilities, VariationalParams};
use tabdisc_model::checkpoint::{load_params, load_posterior, read_manifest, CheckpointKind};
use tabdisc_model::relevance::{forward, rank_tables, sigmoid, Instance, ModelParams};

use crate::artifacts::{Artifacts, Stage};
use crate::config::PipelineConfig;
use crate::features::{query_instance, PassageVectors};
use crate::{layout, Error, Result};

/// Second-stage scorer. Scores are probabilities in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Ranker {
    Mle(ModelParams),
    /// Averages the posterior mean and `samples` sampled weight sets.
    Posterior {
        posterior: VariationalParams,
        samples: usize,
        seed: u64,
    },
}

impl Ranker {
    pub fn triple_scores(&self, features: &[Vec<f32>], inst: &Instance) -> Vec<Vec<f64>> {
        match self {
            Ranker::Mle(params) => forward(params, features, inst, 0.0)
                .scores
                .into_iter()
                .map(|g| g.into_iter().map(sigmoid).collect())
                .collect(),
            Ranker::Posterior {
                posterior,
                samples,
                seed,
            } => averaged_probabilities(posterior, features, inst, *samples, *seed),
        }
    }

    pub fn load(dir: &Path, samples: usize, seed: u64) -> Result<Ranker> {
        Ok(match read_manifest(dir)?.kind {
            CheckpointKind::Mle => Ranker::Mle(load_params(dir)?.0),
            CheckpointKind::Posterior => Ranker::Posterior {
                posterior: load_posterior(dir)?.0,
                samples,
                seed,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleMatch {
    pub text: String,
    pub score: f64,
    pub row: u32,
    /// `None` when the title is the subject.
    pub subject_col: Option<u32>,
    pub object_col: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMatch {
    pub table_id: String,
    pub title: String,
    pub score: f64,
    pub triples: Vec<TripleMatch>,
}

/// Every retrieved table in ranked order, with stage timings.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub tables: Vec<TableMatch>,
    /// Distinct tables of the first-stage retrieval, in first-seen order.
    pub first_stage_tables: Vec<String>,
    pub first_stage_seconds: f64,
    pub second_stage_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TablePreview {
    pub table_id: String,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub n_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineStats {
    pub tables: usize,
    pub triples: usize,
    pub index_kind: IndexKind,
    pub indexed: usize,
    pub encoder_dim: usize,
    pub ranker: String,
}

/// Immutable online artifacts; safe to share across threads.
pub struct Engine {
    cfg: PipelineConfig,
    collection: TableCollection,
    store: TripleStore,
    passages: PassageVectors,
    index: FirstStageIndex,
    encoder: Box<dyn Encoder>,
    ranker: Ranker,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("tables", &self.collection.len())
            .field("triples", &self.store.len())
            .field("index", &self.index.kind())
            .finish()
    }
}

pub const PREVIEW_ROWS: usize = 20;

impl Engine {
    /// Loads and verifies the artifacts online mode needs.
    pub fn load(cfg: &PipelineConfig) -> Result<Engine> {
        let art = Artifacts::new(&cfg.out_dir);
        for stage in [Stage::Prepare, Stage::Triples, Stage::Encode, Stage::Index, Stage::Train] {
            let record = art.require(stage)?;
            if art.verify(stage, &record)? != crate::artifacts::Freshness::Fresh {
                return Err(Error::NotReady(format!("outputs of stage `{stage}` are missing")));
            }
        }
        let collection = layout::load_collection(&art)?;
        let store = layout::load_triples(&art)?;
        let passages = layout::load_passages(&art, cfg.encoder.dim, &store)?;
        let index = FirstStageIndex::load(&art.path(layout::INDEX_DIR))?;
        let ranker = Ranker::load(
            &art.path(layout::MODEL_DIR),
            cfg.bayes.n_test_samples,
            cfg.seed,
        )?;
        Ok(Engine {
            cfg: cfg.clone(),
            encoder: build_encoder(&cfg.encoder)?,
            collection,
            store,
            passages,
            index,
            ranker,
        })
    }

    pub fn from_parts(
        cfg: PipelineConfig,
        collection: TableCollection,
        store: TripleStore,
        passages: PassageVectors,
        index: FirstStageIndex,
        ranker: Ranker,
    ) -> Result<Engine> {
        Ok(Engine {
            encoder: build_encoder(&cfg.encoder)?,
            cfg,
            collection,
            store,
            passages,
            index,
            ranker,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn collection(&self) -> &TableCollection {
        &self.collection
    }

    pub fn ranker(&self) -> &Ranker {
        &self.ranker
    }

    /// Retrieves, scores and orders every first-stage table.
    pub fn rank(&self, question: &str) -> Result<Ranking> {
        let started = Instant::now();
        let retrieval = two_round_retrieve(
            question,
            self.encoder.as_ref(),
            &self.index,
            &self.store,
            &self.cfg.retrieval,
        )?;
        let first_stage_seconds = started.elapsed().as_secs_f64();
        let started = Instant::now();
        if retrieval.is_empty() {
            return Ok(Ranking {
                tables: Vec::new(),
                first_stage_tables: Vec::new(),
                first_stage_seconds,
                second_stage_seconds: 0.0,
            });
        }
        let q = self.encoder.encode_question(question)?;
        let (ids, features, inst) = query_instance(&retrieval, &q, &self.passages)?;
        let scores = self.ranker.triple_scores(&features, &inst);
        let order = rank_tables(
            inst.groups
                .iter()
                .zip(&scores)
                .flat_map(|(g, s)| s.iter().map(move |&v| (g.table_id.as_str(), v))),
        );
        let cap = self.cfg.online.triples_per_table;
        let mut tables = Vec::with_capacity(order.len());
        for ranked in order {
            let (gi, group) = inst
                .groups
                .iter()
                .enumerate()
                .find(|(_, g)| g.table_id == ranked.table_id)
                .expect("ranked table comes from a group");
            let table = self.table(&group.table_id)?;
            let mut matched: Vec<(f64, u64)> = group
                .rows
                .iter()
                .zip(&scores[gi])
                .map(|(&row, &s)| (s, ids[row]))
                .collect();
            matched.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            let triples = matched
                .into_iter()
                .take(cap)
                .map(|(score, id)| {
                    let t = self.store.try_get(id)?;
                    Ok(TripleMatch {
                        text: retrieval_text(t, table),
                        score,
                        row: t.row,
                        subject_col: t.subject_col,
                        object_col: t.object_col,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            tables.push(TableMatch {
                table_id: table.id.clone(),
                title: table.title.clone(),
                score: ranked.score,
                triples,
            });
        }
        Ok(Ranking {
            first_stage_tables: inst.groups.iter().map(|g| g.table_id.clone()).collect(),
            tables,
            first_stage_seconds,
            second_stage_seconds: started.elapsed().as_secs_f64(),
        })
    }

    /// Top-`k` tables with their best matched triples.
    pub fn online_query(&self, question: &str, k: usize) -> Result<Vec<TableMatch>> {
        let mut tables = self.rank(question)?.tables;
        tables.truncate(k);
        Ok(tables)
    }

    fn table(&self, id: &str) -> Result<&Table> {
        self.collection
            .get(id)
            .ok_or_else(|| tabdisc_core::Error::UnknownTable(id.to_owned()).into())
    }

    pub fn preview(&self, id: &str) -> Option<TablePreview> {
        let t = self.collection.get(id)?;
        Some(TablePreview {
            table_id: t.id.clone(),
            title: t.title.clone(),
            columns: t.columns.iter().map(|c| c.name.clone()).collect(),
            rows: t.rows.iter().take(PREVIEW_ROWS).cloned().collect(),
            n_rows: t.n_rows(),
        })
    }

    pub fn stats(&self) -> EngineStats {
        EngineStats {
            tables: self.collection.len(),
            triples: self.store.len(),
            index_kind: self.index.kind(),
            indexed: self.index.len(),
            encoder_dim: self.encoder.dim(),
            ranker: match self.ranker {
                Ranker::Mle(_) => "mle".into(),
                Ranker::Posterior { .. } => "posterior".into(),
            },
        }
    }
}
