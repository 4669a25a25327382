//! Question and passage encoders.
//!
//! The reference encoder is signed feature hashing over word tokens and
//! their character 3-grams, L2-normalized. It is deterministic across
//! platforms and needs no model weights. An HTTP encoder speaks the external
//! wire format `{model, texts}` -> `{vectors}`.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::text::{fnv1a64, word_tokens};
use crate::{Error, Result};

pub const DEFAULT_DIM: usize = 768;
pub const MIN_DIM: usize = 8;

/// Dense embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector {
    pub values: Vec<f32>,
}

impl Vector {
    pub fn zeros(dim: usize) -> Vector {
        Vector {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        dot(&self.values, &self.values).sqrt()
    }
}

impl From<Vec<f32>> for Vector {
    fn from(values: Vec<f32>) -> Self {
        Vector { values }
    }
}

/// Inner product with 64-bit accumulation in index order.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

/// Dot-product similarity between a question and a passage vector.
pub fn similarity(q: &Vector, p: &Vector) -> Result<f64> {
    if q.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            actual: p.dim(),
        });
    }
    Ok(dot(&q.values, &p.values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    #[default]
    ReferenceHash,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalEncoderConfig {
    pub url: String,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_batch")]
    pub max_batch: usize,
}

fn default_model() -> String {
    "passage".into()
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_max_batch() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub kind: EncoderKind,
    #[serde(default)]
    pub external: Option<ExternalEncoderConfig>,
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec::reference(DEFAULT_DIM)
    }
}

impl EncoderSpec {
    pub fn reference(dim: usize) -> EncoderSpec {
        EncoderSpec {
            dim,
            kind: EncoderKind::ReferenceHash,
            external: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < MIN_DIM {
            return Err(Error::Config(format!(
                "encoder dim {} below minimum {MIN_DIM}",
                self.dim
            )));
        }
        if self.kind == EncoderKind::External && self.external.is_none() {
            return Err(Error::Config("external encoder has no endpoint".into()));
        }
        Ok(())
    }
}

/// Encodes questions and passages into vectors of a fixed dimension.
pub trait Encoder: Send + Sync {
    fn dim(&self) -> usize;
    fn encode_passages(&self, texts: &[String]) -> Result<Vec<Vector>>;
    fn encode_questions(&self, texts: &[String]) -> Result<Vec<Vector>>;

    fn encode_passage(&self, text: &str) -> Result<Vector> {
        Ok(self.encode_passages(&[text.to_owned()])?.remove(0))
    }

    fn encode_question(&self, text: &str) -> Result<Vector> {
        Ok(self.encode_questions(&[text.to_owned()])?.remove(0))
    }
}

/// Builds the encoder described by `spec`.
pub fn build_encoder(spec: &EncoderSpec) -> Result<Box<dyn Encoder>> {
    spec.validate()?;
    match spec.kind {
        EncoderKind::ReferenceHash => Ok(Box::new(HashEncoder::new(spec.dim))),
        EncoderKind::External => Ok(Box::new(HttpEncoder::new(
            spec.dim,
            spec.external.clone().expect("validated"),
        )?)),
    }
}

pub fn encode_passage(text: &str, spec: &EncoderSpec) -> Result<Vector> {
    build_encoder(spec)?.encode_passage(text)
}

pub fn encode_question(text: &str, spec: &EncoderSpec) -> Result<Vector> {
    build_encoder(spec)?.encode_question(text)
}

/// Signed feature-hashing encoder shared by questions and passages.
#[derive(Debug, Clone, Copy)]
pub struct HashEncoder {
    dim: usize,
}

impl HashEncoder {
    pub fn new(dim: usize) -> HashEncoder {
        assert!(dim >= MIN_DIM, "encoder dim must be at least {MIN_DIM}");
        HashEncoder { dim }
    }

    pub fn encode(&self, text: &str) -> Vector {
        let mut acc = vec![0f64; self.dim];
        let mut seen: HashMap<String, u32> = HashMap::new();
        let mut add = |feature: &str| {
            let n = seen.entry(feature.to_owned()).or_insert(0);
            *n += 1;
            let h = fnv1a64(feature.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            acc[bucket] += sign / f64::from(*n).sqrt();
        };
        for token in word_tokens(text) {
            add(&token);
            let chars: Vec<char> = token.chars().collect();
            for gram in chars.windows(3) {
                add(&gram.iter().collect::<String>());
            }
        }
        let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        let values = if norm > 0.0 {
            acc.iter().map(|v| (v / norm) as f32).collect()
        } else {
            vec![0.0; self.dim]
        };
        Vector { values }
    }
}

impl Encoder for HashEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_passages(&self, texts: &[String]) -> Result<Vec<Vector>> {
        Ok(texts.iter().map(|t| self.encode(t)).collect())
    }

    fn encode_questions(&self, texts: &[String]) -> Result<Vec<Vector>> {
        self.encode_passages(texts)
    }
}

#[derive(Serialize)]
struct EncodeRequest<'a> {
    model: &'a str,
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EncodeResponse {
    vectors: Vec<Vec<f32>>,
}

/// Client for an external encoding service.
pub struct HttpEncoder {
    dim: usize,
    cfg: ExternalEncoderConfig,
    client: reqwest::blocking::Client,
}

impl HttpEncoder {
    pub fn new(dim: usize, cfg: ExternalEncoderConfig) -> Result<HttpEncoder> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(HttpEncoder { dim, cfg, client })
    }

    fn request(&self, texts: &[String]) -> Result<Vec<Vector>> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.cfg.max_batch.max(1)) {
            let resp = self
                .client
                .post(&self.cfg.url)
                .json(&EncodeRequest {
                    model: &self.cfg.model,
                    texts: chunk,
                })
                .send()
                .and_then(|r| r.error_for_status())
                .map_err(|e| Error::Transport(e.to_string()))?;
            let body: EncodeResponse = resp.json().map_err(|e| Error::Transport(e.to_string()))?;
            if body.vectors.len() != chunk.len() {
                return Err(Error::Transport(format!(
                    "expected {} vectors, got {}",
                    chunk.len(),
                    body.vectors.len()
                )));
            }
            for v in body.vectors {
                if v.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        actual: v.len(),
                    });
                }
                out.push(Vector { values: v });
            }
        }
        Ok(out)
    }
}

impl Encoder for HttpEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_passages(&self, texts: &[String]) -> Result<Vec<Vector>> {
        self.request(texts)
    }

    fn encode_questions(&self, texts: &[String]) -> Result<Vec<Vector>> {
        self.request(texts)
    }
}
