//! On-disk index layout.
//!
//! A directory holding `manifest.json` plus blobs: `vectors.bin` (little
//! endian f32, row-major), `ids.bin` (little endian u64), `centroids.bin` and
//! `lists.bin` (u64 list offsets) for IVF, `postings.json` for BM25. The
//! manifest records a SHA-256 per blob, verified on load.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ivf::IvfList;
use super::{DenseIndexExact, DenseIndexIvf, Hit, SparseIndex};
use crate::embed::Vector;
use crate::text::sha256_hex;
use crate::{Error, Result};

pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Exact,
    Ivf,
    Bm25,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub format_version: u32,
    pub kind: IndexKind,
    pub dim: usize,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_clusters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nprobe: Option<usize>,
    pub checksums: BTreeMap<String, String>,
}

/// Any first-stage index.
#[derive(Debug, Clone, PartialEq)]
pub enum FirstStageIndex {
    Exact(DenseIndexExact),
    Ivf(DenseIndexIvf),
    Sparse(SparseIndex),
}

impl FirstStageIndex {
    pub fn kind(&self) -> IndexKind {
        match self {
            FirstStageIndex::Exact(_) => IndexKind::Exact,
            FirstStageIndex::Ivf(_) => IndexKind::Ivf,
            FirstStageIndex::Sparse(_) => IndexKind::Bm25,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            FirstStageIndex::Exact(i) => i.len(),
            FirstStageIndex::Ivf(i) => i.len(),
            FirstStageIndex::Sparse(i) => i.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dense search; the IVF variant uses its configured `nprobe`.
    pub fn search_dense(&self, q: &Vector, k: usize) -> Result<Vec<Hit>> {
        match self {
            FirstStageIndex::Exact(i) => i.search(q, k),
            FirstStageIndex::Ivf(i) => i.search(q, k, i.nprobe),
            FirstStageIndex::Sparse(_) => Err(Error::Config(
                "sparse index cannot be searched with a vector".into(),
            )),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<IndexManifest> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut blobs: Vec<(&str, Vec<u8>)> = Vec::new();
        let manifest_base = |kind, dim, count| IndexManifest {
            format_version: INDEX_FORMAT_VERSION,
            kind,
            dim,
            count,
            n_clusters: None,
            nprobe: None,
            checksums: BTreeMap::new(),
        };
        let mut manifest = match self {
            FirstStageIndex::Exact(i) => {
                blobs.push(("vectors.bin", f32_bytes(&i.data)));
                blobs.push(("ids.bin", u64_bytes(&i.ids)));
                manifest_base(IndexKind::Exact, i.dim, i.len())
            }
            FirstStageIndex::Ivf(i) => {
                let data: Vec<f32> = i.lists.iter().flat_map(|l| l.data.iter().copied()).collect();
                let ids: Vec<u64> = i.lists.iter().flat_map(|l| l.ids.iter().copied()).collect();
                let mut offsets = vec![0u64];
                for l in &i.lists {
                    offsets.push(offsets.last().unwrap() + l.ids.len() as u64);
                }
                blobs.push(("vectors.bin", f32_bytes(&data)));
                blobs.push(("ids.bin", u64_bytes(&ids)));
                blobs.push(("centroids.bin", f32_bytes(&i.centroids)));
                blobs.push(("lists.bin", u64_bytes(&offsets)));
                let mut m = manifest_base(IndexKind::Ivf, i.dim, i.len());
                m.n_clusters = Some(i.n_clusters());
                m.nprobe = Some(i.nprobe);
                m
            }
            FirstStageIndex::Sparse(i) => {
                blobs.push((
                    "postings.json",
                    serde_json::to_vec(i).expect("sparse index serializes"),
                ));
                manifest_base(IndexKind::Bm25, 0, i.len())
            }
        };
        for (name, bytes) in &blobs {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            manifest.checksums.insert(name.to_string(), sha256_hex(bytes));
        }
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }

    pub fn load(dir: &Path) -> Result<FirstStageIndex> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: IndexManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if manifest.format_version != INDEX_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "index format version {}",
                manifest.format_version
            )));
        }
        let read = |name: &str| -> Result<Vec<u8>> {
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let expected = manifest.checksums.get(name).ok_or_else(|| Error::Checksum {
                file: name.to_owned(),
            })?;
            if &sha256_hex(&bytes) != expected {
                return Err(Error::Checksum {
                    file: path.display().to_string(),
                });
            }
            Ok(bytes)
        };
        match manifest.kind {
            IndexKind::Exact => {
                let data = bytes_f32(&read("vectors.bin")?)?;
                let ids = bytes_u64(&read("ids.bin")?)?;
                Ok(FirstStageIndex::Exact(DenseIndexExact::from_parts(
                    manifest.dim,
                    data,
                    ids,
                )?))
            }
            IndexKind::Ivf => {
                let dim = manifest.dim;
                let data = bytes_f32(&read("vectors.bin")?)?;
                let ids = bytes_u64(&read("ids.bin")?)?;
                let centroids = bytes_f32(&read("centroids.bin")?)?;
                let offsets = bytes_u64(&read("lists.bin")?)?;
                if data.len() != ids.len() * dim
                    || offsets.last().copied() != Some(ids.len() as u64)
                {
                    return Err(Error::Format("inconsistent ivf blobs".into()));
                }
                let lists = offsets
                    .windows(2)
                    .map(|w| {
                        let (a, b) = (w[0] as usize, w[1] as usize);
                        IvfList {
                            ids: ids[a..b].to_vec(),
                            data: data[a * dim..b * dim].to_vec(),
                        }
                    })
                    .collect();
                Ok(FirstStageIndex::Ivf(DenseIndexIvf {
                    dim,
                    centroids,
                    lists,
                    nprobe: manifest.nprobe.unwrap_or(1),
                }))
            }
            IndexKind::Bm25 => {
                let bytes = read("postings.json")?;
                let sparse = serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
                    path: dir.join("postings.json"),
                    message: e.to_string(),
                })?;
                Ok(FirstStageIndex::Sparse(sparse))
            }
        }
    }
}

fn f32_bytes(v: &[f32]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn u64_bytes(v: &[u64]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn bytes_f32(b: &[u8]) -> Result<Vec<f32>> {
    if b.len() % 4 != 0 {
        return Err(Error::Format("f32 blob length".into()));
    }
    Ok(b.chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn bytes_u64(b: &[u8]) -> Result<Vec<u64>> {
    if b.len() % 8 != 0 {
        return Err(Error::Format("u64 blob length".into()));
    }
    Ok(b.chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
