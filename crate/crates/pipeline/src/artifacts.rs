//! Artifact directory layout and per-stage manifests.
//!
//! Every artifact directory holds a `manifest.json` with the full pipeline
//! config and one record per stage writing into it. A record stores the hash
//! of the config slice the stage depends on, digests of its upstream
//! records, and sha256 checksums of every file it produced. A stage is fresh
//! when all three still match; a present output whose checksum differs is a
//! hard error attributed to the stage that wrote it.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn json_hash<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("value serializes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Prepare,
    Triples,
    Encode,
    Index,
    GenSql,
    GenQuestions,
    Collect,
    Train,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Prepare,
        Stage::Triples,
        Stage::Encode,
        Stage::Index,
        Stage::GenSql,
        Stage::GenQuestions,
        Stage::Collect,
        Stage::Train,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Prepare => "prepare",
            Stage::Triples => "triples",
            Stage::Encode => "encode",
            Stage::Index => "index",
            Stage::GenSql => "gen-sql",
            Stage::GenQuestions => "gen-questions",
            Stage::Collect => "collect",
            Stage::Train => "train",
            Stage::Eval => "eval",
        }
    }

    /// Artifact directory the stage writes into.
    pub fn dir(self) -> &'static str {
        match self {
            Stage::Prepare => "corpus",
            Stage::Triples | Stage::Encode => "triples",
            Stage::Index => "index",
            Stage::GenSql | Stage::GenQuestions => "questions",
            Stage::Collect => "datasets",
            Stage::Train => "checkpoints",
            Stage::Eval => "reports",
        }
    }

    pub fn deps(self) -> &'static [Stage] {
        match self {
            Stage::Prepare => &[],
            Stage::Triples => &[Stage::Prepare],
            Stage::Encode => &[Stage::Triples],
            Stage::Index => &[Stage::Triples, Stage::Encode],
            Stage::GenSql => &[Stage::Prepare],
            Stage::GenQuestions => &[Stage::Prepare, Stage::GenSql],
            Stage::Collect => &[Stage::Prepare, Stage::Triples, Stage::Index, Stage::GenSql, Stage::GenQuestions],
            Stage::Train => &[Stage::Prepare, Stage::Triples, Stage::Encode, Stage::Collect],
            Stage::Eval => &[Stage::Prepare, Stage::Triples, Stage::Encode, Stage::Index, Stage::GenQuestions, Stage::Train],
        }
    }

    /// The part of the config a stage's outputs depend on directly.
    pub fn config_slice(self, cfg: &PipelineConfig) -> serde_json::Value {
        use serde_json::json;
        match self {
            Stage::Prepare => json!({ "corpus": cfg.corpus, "seed": cfg.synthetic_seed() }),
            Stage::Triples => json!({}),
            Stage::Encode => json!({ "encoder": cfg.encoder }),
            Stage::Index => json!({ "index": cfg.index, "seed": cfg.seed }),
            Stage::GenSql => json!({ "sqlgen": cfg.sqlgen, "seed": cfg.seed }),
            Stage::GenQuestions => json!({ "questions": cfg.questions }),
            Stage::Collect => json!({
                "retrieval": cfg.retrieval_config(),
                "datasets": cfg.datasets,
                "sqlgen": cfg.sqlgen,
                "questions": cfg.questions,
                "seed": cfg.seed,
            }),
            Stage::Train => json!({
                "relevance": cfg.relevance_config(),
                "bayes": cfg.bayes_config(),
                "trainer": cfg.trainer,
            }),
            Stage::Eval => json!({ "retrieval": cfg.retrieval_config(), "online": cfg.online }),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Stage> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    /// Digest of each upstream stage record at the time this stage ran.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the artifact root, to its sha256.
    pub outputs: BTreeMap<String, String>,
    /// Item counts such as tables, triples or questions.
    pub counts: BTreeMap<String, u64>,
    pub seconds: f64,
}

impl StageRecord {
    /// Digest identifying this record's outputs, used by downstream stages.
    pub fn digest(&self) -> String {
        json_hash(&(&self.config_hash, &self.outputs))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DirManifest {
    pub config: serde_json::Value,
    pub stages: BTreeMap<String, StageRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Freshness {
    Fresh,
    Stale,
}

/// Root of a pipeline run's artifacts.
#[derive(Debug, Clone)]
pub struct Artifacts {
    root: PathBuf,
}

impl Artifacts {
    pub fn new(root: impl Into<PathBuf>) -> Artifacts {
        Artifacts { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.dir())
    }

    fn manifest_path(&self, dir: &str) -> PathBuf {
        self.root.join(dir).join("manifest.json")
    }

    pub fn dir_manifest(&self, dir: &str) -> Result<Option<DirManifest>> {
        let path = self.manifest_path(dir);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map(Some).map_err(|e| Error::Parse {
            path,
            message: e.to_string(),
        })
    }

    pub fn record(&self, stage: Stage) -> Result<Option<StageRecord>> {
        Ok(self
            .dir_manifest(stage.dir())?
            .and_then(|m| m.stages.get(stage.name()).cloned()))
    }

    /// The record of a completed stage, or a not-ready error.
    pub fn require(&self, stage: Stage) -> Result<StageRecord> {
        self.record(stage)?
            .ok_or_else(|| Error::NotReady(format!("stage `{stage}` has not run")))
    }

    pub fn write_record(&self, stage: Stage, cfg: &PipelineConfig, record: StageRecord) -> Result<()> {
        let dir = self.root.join(stage.dir());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut manifest = self.dir_manifest(stage.dir())?.unwrap_or_default();
        manifest.config = serde_json::to_value(cfg).expect("config serializes");
        manifest.stages.insert(stage.name().to_owned(), record);
        let path = self.manifest_path(stage.dir());
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Digests of the current upstream records.
    pub fn inputs(&self, stage: Stage) -> Result<BTreeMap<String, String>> {
        stage
            .deps()
            .iter()
            .map(|&d| Ok((d.name().to_owned(), self.require(d)?.digest())))
            .collect()
    }

    /// Verifies every output of a stage; errors name the stage.
    pub fn verify(&self, stage: Stage, record: &StageRecord) -> Result<Freshness> {
        for (rel, sum) in &record.outputs {
            let path = self.root.join(rel);
            if !path.exists() {
                return Ok(Freshness::Stale);
            }
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if &sha256_hex(&bytes) != sum {
                return Err(Error::Checksum {
                    stage,
                    file: rel.clone(),
                });
            }
        }
        Ok(Freshness::Fresh)
    }

    /// Compares a stage's record with the expected config hash and inputs,
    /// then verifies its outputs.
    pub fn freshness(
        &self,
        stage: Stage,
        config_hash: &str,
        inputs: &BTreeMap<String, String>,
    ) -> Result<Freshness> {
        let Some(record) = self.record(stage)? else {
            return Ok(Freshness::Stale);
        };
        if record.config_hash != config_hash || &record.inputs != inputs {
            return Ok(Freshness::Stale);
        }
        self.verify(stage, &record)
    }

    /// Reads an output of `stage`, checking it against the stage record.
    pub fn read_verified(&self, stage: Stage, rel: &str) -> Result<Vec<u8>> {
        let record = self.require(stage)?;
        let expected = record.outputs.get(rel).ok_or_else(|| {
            Error::NotReady(format!("stage `{stage}` recorded no output `{rel}`"))
        })?;
        let path = self.root.join(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if &sha256_hex(&bytes) != expected {
            return Err(Error::Checksum {
                stage,
                file: rel.to_owned(),
            });
        }
        Ok(bytes)
    }

    /// Files currently present in a stage's directory, relative to the root.
    pub fn present_files(&self, stage: Stage) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack = vec![self.root.join(stage.dir())];
        while let Some(dir) = stack.pop() {
            let Ok(entries) = fs::read_dir(&dir) else { continue };
            for entry in entries.flatten() {
                let path = entry.path();
                if path.is_dir() {
                    stack.push(path);
                } else if let Ok(rel) = path.strip_prefix(&self.root) {
                    out.push(rel.to_string_lossy().into_owned());
                }
            }
        }
        out.sort();
        out
    }
}

/// Collects output checksums while a stage writes its files.
#[derive(Debug, Default)]
pub struct Outputs {
    files: BTreeMap<String, String>,
}

impl Outputs {
    pub fn write(&mut self, art: &Artifacts, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = art.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.insert(rel.to_owned(), sha256_hex(bytes));
        Ok(())
    }

    /// Records a file written by other code.
    pub fn track(&mut self, art: &Artifacts, rel: &str) -> Result<()> {
        let path = art.path(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.files.insert(rel.to_owned(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn into_map(self) -> BTreeMap<String, String> {
        self.files
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
            assert_eq!(serde_json::to_value(s).unwrap(), s.name());
        }
        assert!("bogus".parse::<Stage>().is_err());
    }

    #[test]
    fn deps_precede_stage() {
        for (i, s) in Stage::ALL.iter().enumerate() {
            for d in s.deps() {
                assert!(Stage::ALL[..i].contains(d), "{s} depends on later {d}");
            }
        }
    }
}
