//! Pipeline configuration, read from a TOML file with one section per
//! concern. Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tabdisc_core::corpus::SourceFormat;
use tabdisc_core::embed::EncoderSpec;
use tabdisc_core::index::{Bm25Params, IndexKind, RetrievalParams};
use tabdisc_core::qgen::TranslatorConfig;
use tabdisc_core::sqlgen::GenConfig;
use tabdisc_core::trainset::RetrievalConfig;
use tabdisc_model::bayes::{BayesConfig, KlWeight};
use tabdisc_model::relevance::RelevanceConfig;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub encoder: EncoderSpec,
    #[serde(default)]
    pub index: IndexConfig,
    #[serde(default)]
    pub retrieval: RetrievalParams,
    #[serde(default)]
    pub sqlgen: SqlGenSection,
    #[serde(default)]
    pub questions: QuestionSection,
    #[serde(default)]
    pub datasets: DatasetSection,
    #[serde(default)]
    pub relevance: RelevanceSection,
    #[serde(default)]
    pub bayes: BayesSection,
    #[serde(default)]
    pub trainer: TrainerKind,
    #[serde(default)]
    pub online: OnlineSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CorpusConfig {
    /// Tables read from a jsonl file or a directory of csv files.
    Files { path: PathBuf, format: SourceFormat },
    /// Tables produced by the seeded synthetic generator.
    Synthetic {
        tables: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexConfig {
    #[serde(default = "default_index_kind")]
    pub kind: IndexKind,
    #[serde(default = "default_n_clusters")]
    pub n_clusters: usize,
    #[serde(default = "default_nprobe")]
    pub nprobe: usize,
    #[serde(default)]
    pub bm25: Bm25Params,
}

fn default_index_kind() -> IndexKind {
    IndexKind::Exact
}
fn default_n_clusters() -> usize {
    64
}
fn default_nprobe() -> usize {
    8
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            kind: default_index_kind(),
            n_clusters: default_n_clusters(),
            nprobe: default_nprobe(),
            bm25: Bm25Params::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqlGenSection {
    /// SQLs sampled by the gen-sql stage.
    #[serde(default = "default_initial_sqls")]
    pub initial: usize,
    #[serde(default = "default_max_cond_cols")]
    pub max_cond_cols: usize,
    #[serde(default = "default_agg_probability")]
    pub agg_probability: f64,
}

fn default_initial_sqls() -> usize {
    1000
}
fn default_max_cond_cols() -> usize {
    3
}
fn default_agg_probability() -> f64 {
    0.2
}

impl Default for SqlGenSection {
    fn default() -> Self {
        SqlGenSection {
            initial: default_initial_sqls(),
            max_cond_cols: default_max_cond_cols(),
            agg_probability: default_agg_probability(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct QuestionSection {
    /// Questions set aside for evaluation; taken first in generation order.
    #[serde(default)]
    pub held_out: usize,
    /// External translation service; templates are used when absent.
    #[serde(default)]
    pub translator: Option<TranslatorConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default = "default_dataset_count")]
    pub count: usize,
    #[serde(default = "default_dataset_size")]
    pub size: usize,
    /// Extra SQL rounds the collect stage may request on a shortfall.
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
}

fn default_dataset_count() -> usize {
    2
}
fn default_dataset_size() -> usize {
    200
}
fn default_max_rounds() -> usize {
    5
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            count: default_dataset_count(),
            size: default_dataset_size(),
            max_rounds: default_max_rounds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelevanceSection {
    #[serde(default = "default_proj_dim")]
    pub proj_dim: usize,
    #[serde(default = "default_lambda_div")]
    pub lambda_div: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_patience")]
    pub epoch_patience: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
}

fn default_proj_dim() -> usize {
    128
}
fn default_lambda_div() -> f64 {
    0.1
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_patience() -> usize {
    1
}
fn default_max_epochs() -> usize {
    50
}

impl Default for RelevanceSection {
    fn default() -> Self {
        RelevanceSection {
            proj_dim: default_proj_dim(),
            lambda_div: default_lambda_div(),
            learning_rate: default_learning_rate(),
            epoch_patience: default_patience(),
            max_epochs: default_max_epochs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BayesSection {
    #[serde(default = "default_test_samples")]
    pub n_test_samples: usize,
    #[serde(default)]
    pub kl_weight: Option<f64>,
    #[serde(default = "default_patience")]
    pub dataset_patience: usize,
}

fn default_test_samples() -> usize {
    6
}

impl Default for BayesSection {
    fn default() -> Self {
        BayesSection {
            n_test_samples: default_test_samples(),
            kl_weight: None,
            dataset_patience: default_patience(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TrainerKind {
    Simple,
    #[default]
    Bayesian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineSection {
    /// Default number of tables returned per query.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Matched triples reported per table.
    #[serde(default = "default_triples_per_table")]
    pub triples_per_table: usize,
    /// Cutoffs reported by evaluation besides P@Max.
    #[serde(default = "default_eval_ks")]
    pub eval_ks: Vec<usize>,
}

fn default_top_k() -> usize {
    5
}
fn default_triples_per_table() -> usize {
    3
}
fn default_eval_ks() -> Vec<usize> {
    vec![1, 5]
}

impl Default for OnlineSection {
    fn default() -> Self {
        OnlineSection {
            top_k: default_top_k(),
            triples_per_table: default_triples_per_table(),
            eval_ks: default_eval_ks(),
        }
    }
}

impl PipelineConfig {
    /// Reads a config file; relative paths become relative to its directory.
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = PipelineConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(message) => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<PipelineConfig> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.out_dir);
        if let CorpusConfig::Files { path, .. } = &mut self.corpus {
            resolve(path);
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> PipelineConfig {
        if let Some(s) = seed {
            self.seed = s;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.retrieval.validate()?;
        self.relevance_config().validate()?;
        if self.datasets.count == 0 || self.datasets.size < 2 {
            return Err(Error::Config("datasets need count >= 1 and size >= 2".into()));
        }
        if self.index.kind == IndexKind::Ivf && (self.index.n_clusters == 0 || self.index.nprobe == 0) {
            return Err(Error::Config("ivf needs n_clusters and nprobe >= 1".into()));
        }
        if self.sqlgen.initial == 0 || self.sqlgen.max_cond_cols == 0 {
            return Err(Error::Config("sqlgen needs initial and max_cond_cols >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.sqlgen.agg_probability) {
            return Err(Error::Config("agg_probability outside [0, 1]".into()));
        }
        if self.online.top_k == 0 || self.online.eval_ks.contains(&0) {
            return Err(Error::Config("cutoffs must be positive".into()));
        }
        if let CorpusConfig::Synthetic { tables: 0, .. } = self.corpus {
            return Err(Error::Config("synthetic corpus needs at least one table".into()));
        }
        Ok(())
    }

    /// Features are `[q; p; q*p; |q-p|]`.
    pub fn feature_dim(&self) -> usize {
        4 * self.encoder.dim
    }

    pub fn gen_config(&self, batch_size: usize, seed: u64) -> GenConfig {
        GenConfig {
            batch_size,
            max_cond_cols: self.sqlgen.max_cond_cols,
            seed,
            agg_probability: self.sqlgen.agg_probability,
        }
    }

    pub fn relevance_config(&self) -> RelevanceConfig {
        RelevanceConfig {
            feature_dim: self.feature_dim(),
            proj_dim: self.relevance.proj_dim,
            lambda_div: self.relevance.lambda_div,
            learning_rate: self.relevance.learning_rate,
            epoch_patience: self.relevance.epoch_patience,
            max_epochs: self.relevance.max_epochs,
            seed: self.seed,
        }
    }

    pub fn bayes_config(&self) -> BayesConfig {
        BayesConfig {
            n_test_samples: self.bayes.n_test_samples,
            kl_weight: self.bayes.kl_weight.map_or(KlWeight::PerBatch, KlWeight::Fixed),
            epoch_patience: self.relevance.epoch_patience,
            dataset_patience: self.bayes.dataset_patience,
            seed: self.seed,
        }
    }

    pub fn retrieval_config(&self) -> RetrievalConfig {
        RetrievalConfig {
            params: self.retrieval,
            encoder: self.encoder.clone(),
            index_kind: self.index.kind,
            nprobe: (self.index.kind == IndexKind::Ivf).then_some(self.index.nprobe),
        }
    }

    pub fn synthetic_seed(&self) -> Option<u64> {
        match self.corpus {
            CorpusConfig::Synthetic { seed, .. } => Some(seed.unwrap_or(self.seed)),
            CorpusConfig::Files { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
out_dir = "run"

[corpus]
source = "synthetic"
tables = 5
"#;

    #[test]
    fn defaults_fill_sections() {
        let cfg = PipelineConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.encoder.dim, 768);
        assert_eq!(cfg.trainer, TrainerKind::Bayesian);
        assert_eq!(cfg.feature_dim(), 3072);
        assert_eq!(cfg.bayes_config().n_test_samples, 6);
        assert_eq!(cfg.relevance_config().epoch_patience, 1);
        assert_eq!(cfg.synthetic_seed(), Some(0));
    }

    #[test]
    fn toml_round_trip() {
        let cfg = PipelineConfig::from_toml(MINIMAL).unwrap().with_seed(Some(9));
        let again = PipelineConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.synthetic_seed(), Some(9));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(PipelineConfig::from_toml(&format!("{MINIMAL}\n[online]\nbogus = 1\n")).is_err());
        let bad = MINIMAL.replace("tables = 5", "tables = 0");
        assert!(PipelineConfig::from_toml(&bad).is_err());
        let bad = format!("{MINIMAL}\n[encoder]\ndim = 4\n");
        assert!(PipelineConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.toml");
        std::fs::write(&path, MINIMAL).unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.out_dir, dir.path().join("run"));
    }
}
