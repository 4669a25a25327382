//! Checkpoint directories: `manifest.json` plus `params.bin` (little-endian
//! f64). Posterior checkpoints store the means in `params.bin` and add
//! `rho.bin`, so either kind loads as deterministic [`ModelParams`].

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bayes::VariationalParams;
use crate::relevance::{ModelParams, ParamShape};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const PARAMS_FILE: &str = "params.bin";
const RHO_FILE: &str = "rho.bin";
const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointKind {
    Mle,
    Posterior,
}

/// Provenance recorded with a checkpoint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: serde_json::Value,
    pub seed: u64,
    pub dataset_hashes: Vec<String>,
    pub eval: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub kind: CheckpointKind,
    pub shape: ParamShape,
    #[serde(flatten)]
    pub meta: CheckpointMeta,
    pub checksums: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_bytes(v: &[f64]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn write(
    dir: &Path,
    kind: CheckpointKind,
    shape: ParamShape,
    meta: &CheckpointMeta,
    blobs: &[(&str, &[f64])],
) -> Result<CheckpointManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut checksums = BTreeMap::new();
    for (name, values) in blobs {
        let bytes = to_bytes(values);
        let path = dir.join(name);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        checksums.insert(name.to_string(), sha256_hex(&bytes));
    }
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_FORMAT_VERSION,
        kind,
        shape,
        meta: meta.clone(),
        checksums,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<CheckpointManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if manifest.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Parse {
            path,
            message: format!("unsupported format version {}", manifest.format_version),
        });
    }
    Ok(manifest)
}

fn read_blob(dir: &Path, manifest: &CheckpointManifest, name: &str) -> Result<Vec<f64>> {
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if manifest.checksums.get(name) != Some(&sha256_hex(&bytes)) {
        return Err(Error::Checksum {
            file: path.display().to_string(),
        });
    }
    if bytes.len() != manifest.shape.len() * 8 {
        return Err(Error::DimensionMismatch {
            expected: manifest.shape.len(),
            actual: bytes.len() / 8,
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn save_params(dir: &Path, params: &ModelParams, meta: &CheckpointMeta) -> Result<CheckpointManifest> {
    write(dir, CheckpointKind::Mle, params.shape, meta, &[(PARAMS_FILE, &params.values)])
}

/// Deterministic parameters from either checkpoint kind.
pub fn load_params(dir: &Path) -> Result<(ModelParams, CheckpointManifest)> {
    let manifest = read_manifest(dir)?;
    let values = read_blob(dir, &manifest, PARAMS_FILE)?;
    Ok((
        ModelParams {
            shape: manifest.shape,
            values,
        },
        manifest,
    ))
}

pub fn save_posterior(dir: &Path, v: &VariationalParams, meta: &CheckpointMeta) -> Result<CheckpointManifest> {
    write(
        dir,
        CheckpointKind::Posterior,
        v.shape,
        meta,
        &[(PARAMS_FILE, &v.mu), (RHO_FILE, &v.rho)],
    )
}

pub fn load_posterior(dir: &Path) -> Result<(VariationalParams, CheckpointManifest)> {
    let manifest = read_manifest(dir)?;
    if manifest.kind != CheckpointKind::Posterior {
        return Err(Error::Parse {
            path: dir.join(MANIFEST_FILE),
            message: "not a posterior checkpoint".into(),
        });
    }
    let mu = read_blob(dir, &manifest, PARAMS_FILE)?;
    let rho = read_blob(dir, &manifest, RHO_FILE)?;
    Ok((
        VariationalParams {
            shape: manifest.shape,
            mu,
            rho,
        },
        manifest,
    ))
}
