//! Row-wise complete graph decomposition.
//!
//! Every row becomes a complete graph whose nodes are the table title (when
//! present) and the row's usable cells. Each edge is one [`Triple`]: title
//! edges point from the title to the cell, cell edges point from the lower
//! column index to the higher one.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{is_outlier_cell, CellStats, Table, TableCollection};
use crate::text::{normalize_ws, Fnv1a};
use crate::{Error, Result};

/// One edge of a row's complete graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub triple_id: u64,
    pub table_id: String,
    pub row: u32,
    /// `None` when the title is the subject.
    pub subject_col: Option<u32>,
    pub subject: String,
    pub object_col: u32,
    pub object: String,
}

/// Stable content hash of a triple's coordinates.
pub fn triple_id(table_id: &str, row: u32, subject_col: Option<u32>, object_col: u32) -> u64 {
    let mut h = Fnv1a::default();
    h.write(&(table_id.len() as u64).to_le_bytes())
        .write(table_id.as_bytes())
        .write(&row.to_le_bytes())
        .write(&subject_col.map_or(u64::MAX, u64::from).to_le_bytes())
        .write(&object_col.to_le_bytes());
    h.finish()
}

impl Triple {
    fn new(table: &Table, row: usize, subject_col: Option<usize>, object_col: usize) -> Triple {
        let row32 = row as u32;
        let sc = subject_col.map(|c| c as u32);
        let oc = object_col as u32;
        Triple {
            triple_id: triple_id(&table.id, row32, sc, oc),
            table_id: table.id.clone(),
            row: row32,
            subject_col: sc,
            subject: match subject_col {
                Some(c) => table.cell(row, c).to_owned(),
                None => table.title.clone(),
            },
            object_col: oc,
            object: table.cell(row, object_col).to_owned(),
        }
    }

    pub fn is_title_subject(&self) -> bool {
        self.subject_col.is_none()
    }

    fn sort_key(&self) -> (&str, u32, Option<u32>, u32) {
        (&self.table_id, self.row, self.subject_col, self.object_col)
    }
}

/// Builds all triples of one row. Empty and outlier cells are not nodes.
pub fn build_row_triples(table: &Table, row: usize, stats: &CellStats) -> Vec<Triple> {
    let cells: Vec<usize> = (0..table.n_cols())
        .filter(|&c| {
            let cell = table.cell(row, c);
            !cell.is_empty() && !is_outlier_cell(cell, stats)
        })
        .collect();
    let mut out = Vec::new();
    if !table.title.is_empty() {
        out.extend(cells.iter().map(|&c| Triple::new(table, row, None, c)));
    }
    for (i, &s) in cells.iter().enumerate() {
        for &o in &cells[i + 1..] {
            out.push(Triple::new(table, row, Some(s), o));
        }
    }
    out
}

/// Predicate string: the object column name for title edges, otherwise
/// `"<subject column> - <object column>"`.
pub fn predicate_of(tr: &Triple, table: &Table) -> String {
    let object_name = &table.columns[tr.object_col as usize].name;
    match tr.subject_col {
        None => object_name.clone(),
        Some(sc) => format!("{} - {}", table.columns[sc as usize].name, object_name),
    }
}

/// Text used for first-stage encoding and BM25 indexing.
pub fn retrieval_text(tr: &Triple, table: &Table) -> String {
    let object_name = &table.columns[tr.object_col as usize].name;
    let mut segments = Vec::with_capacity(3);
    let title = normalize_ws(&table.title);
    if !title.is_empty() {
        segments.push(title);
    }
    if let Some(sc) = tr.subject_col {
        segments.push(normalize_ws(&format!(
            "{} {}",
            table.columns[sc as usize].name, tr.subject
        )));
    }
    segments.push(normalize_ws(&format!("{} {}", object_name, tr.object)));
    segments.retain(|s| !s.is_empty());
    let mut text = segments.join(". ");
    text.push('.');
    text
}

/// Role-tagged text used by the relevance model.
pub fn annotate(tr: &Triple, table: &Table) -> String {
    let (subject_col, subject) = match tr.subject_col {
        Some(sc) => (table.columns[sc as usize].name.as_str(), tr.subject.as_str()),
        None => ("", ""),
    };
    let parts = [
        "[T]",
        table.title.as_str(),
        "[SC]",
        subject_col,
        "[S]",
        subject,
        "[OC]",
        table.columns[tr.object_col as usize].name.as_str(),
        "[O]",
        tr.object.as_str(),
    ];
    parts
        .iter()
        .filter(|p| !p.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join(" ")
}

/// All triples of a collection, ordered by `(table_id, row, subject_col,
/// object_col)` and addressable by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripleStore {
    triples: Vec<Triple>,
    by_id: HashMap<u64, usize>,
}

impl TripleStore {
    pub fn from_triples(mut triples: Vec<Triple>) -> TripleStore {
        triples.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let by_id = triples
            .iter()
            .enumerate()
            .map(|(i, t)| (t.triple_id, i))
            .collect();
        TripleStore { triples, by_id }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn as_slice(&self) -> &[Triple] {
        &self.triples
    }

    pub fn get(&self, id: u64) -> Option<&Triple> {
        self.by_id.get(&id).map(|&i| &self.triples[i])
    }

    pub fn try_get(&self, id: u64) -> Result<&Triple> {
        self.get(id).ok_or(Error::UnknownTriple(id))
    }

    /// Writes the binary store and an inspection sidecar (`<path>.jsonl`).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(STORE_MAGIC);
        buf.extend_from_slice(&STORE_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.triples.len() as u64).to_le_bytes());
        for t in &self.triples {
            buf.extend_from_slice(&t.triple_id.to_le_bytes());
            put_str(&mut buf, &t.table_id);
            buf.extend_from_slice(&t.row.to_le_bytes());
            buf.extend_from_slice(&t.subject_col.map_or(-1i64, i64::from).to_le_bytes());
            buf.extend_from_slice(&t.object_col.to_le_bytes());
            put_str(&mut buf, &t.subject);
            put_str(&mut buf, &t.object);
        }
        fs::write(path, &buf).map_err(|e| Error::io(path, e))?;

        let sidecar = sidecar_path(path);
        let file = fs::File::create(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let mut w = BufWriter::new(file);
        for t in &self.triples {
            let line = serde_json::json!({
                "triple_id": format!("{:016x}", t.triple_id),
                "table_id": t.table_id,
                "row": t.row,
                "cols": [t.subject_col, t.object_col],
            });
            writeln!(w, "{line}").map_err(|e| Error::io(&sidecar, e))?;
        }
        w.flush().map_err(|e| Error::io(&sidecar, e))
    }

    pub fn load(path: &Path) -> Result<TripleStore> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let corrupt = |what: &str| Error::Parse {
            path: path.to_path_buf(),
            message: what.to_owned(),
        };
        let mut r = ByteReader::new(&bytes);
        if r.take(4).ok_or_else(|| corrupt("truncated header"))? != STORE_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u32().ok_or_else(|| corrupt("truncated header"))?;
        if version != STORE_VERSION {
            return Err(Error::Format(format!("triple store version {version}")));
        }
        let n = r.u64().ok_or_else(|| corrupt("truncated header"))? as usize;
        let mut triples = Vec::with_capacity(n);
        for _ in 0..n {
            let t = (|| {
                Some(Triple {
                    triple_id: r.u64()?,
                    table_id: r.string()?,
                    row: r.u32()?,
                    subject_col: u32::try_from(r.i64()?).ok(),
                    object_col: r.u32()?,
                    subject: r.string()?,
                    object: r.string()?,
                })
            })()
            .ok_or_else(|| corrupt("truncated record"))?;
            triples.push(t);
        }
        Ok(TripleStore::from_triples(triples))
    }
}

const STORE_MAGIC: &[u8; 4] = b"TRPL";
const STORE_VERSION: u32 = 1;

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".jsonl");
    s.into()
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    fn i64(&mut self) -> Option<i64> {
        Some(i64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    fn string(&mut self) -> Option<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).ok()
    }
}

/// Decomposes every row of every table.
pub fn build_collection_triples(c: &TableCollection) -> TripleStore {
    let tables: Vec<&Table> = c.tables().collect();
    let triples: Vec<Triple> = tables
        .par_iter()
        .flat_map_iter(|t| {
            let stats = c.stats(&t.id).copied().expect("prepared collection has stats");
            (0..t.n_rows())
                .flat_map(move |r| build_row_triples(t, r, &stats))
                .collect::<Vec<_>>()
        })
        .collect();
    TripleStore::from_triples(triples)
}
