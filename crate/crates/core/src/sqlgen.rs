//! Sampling of single-table SQL queries used as question seeds.
//!
//! Each accepted query selects one named column, filters on a random subset
//! of other named columns using the values of one sampled "good" row, may
//! add the table title as an `About` condition with probability
//! `1 / (conditions + 1)`, and may aggregate numeric selections.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{is_outlier_cell, Table, TableCollection};
use crate::text::Fnv1a;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AggOp {
    Max,
    Min,
    Count,
    Sum,
    Avg,
}

impl AggOp {
    pub const ALL: [AggOp; 5] = [AggOp::Max, AggOp::Min, AggOp::Count, AggOp::Sum, AggOp::Avg];

    pub fn token(self) -> &'static str {
        match self {
            AggOp::Max => "[M-A-X]",
            AggOp::Min => "[M-I-N]",
            AggOp::Count => "[C-O-U-N-T]",
            AggOp::Sum => "[S-U-M]",
            AggOp::Avg => "[A-V-G]",
        }
    }

    pub fn from_token(token: &str) -> Option<AggOp> {
        AggOp::ALL.into_iter().find(|op| op.token() == token)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CmpOp {
    Eq,
    Lt,
    Gt,
}

impl CmpOp {
    pub const ALL: [CmpOp; 3] = [CmpOp::Eq, CmpOp::Lt, CmpOp::Gt];

    pub fn token(self) -> &'static str {
        match self {
            CmpOp::Eq => "[E-Q]",
            CmpOp::Lt => "[L-T]",
            CmpOp::Gt => "[G-T]",
        }
    }

    pub fn from_token(token: &str) -> Option<CmpOp> {
        CmpOp::ALL.into_iter().find(|op| op.token() == token)
    }
}

pub const SELECT_TOKEN: &str = "[S-E-L-E-C-T]";
pub const WHERE_TOKEN: &str = "[W-H-E-R-E]";
pub const AND_TOKEN: &str = "[A-N-D]";
pub const TITLE_ATTRIBUTE: &str = "About";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CondTarget {
    Column(usize),
    Title,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub target: CondTarget,
    pub op: CmpOp,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SqlQuery {
    pub table_id: String,
    pub sel_col: usize,
    pub agg_op: Option<AggOp>,
    /// Column conditions first, then the optional title condition.
    pub conditions: Vec<Condition>,
    pub use_title: bool,
    /// Row whose cells supplied the condition values.
    pub row: usize,
}

impl SqlQuery {
    pub fn column_conditions(&self) -> impl Iterator<Item = (usize, &Condition)> {
        self.conditions.iter().filter_map(|c| match c.target {
            CondTarget::Column(col) => Some((col, c)),
            CondTarget::Title => None,
        })
    }
}

/// Escaped canonical text, the dedup key and translator input.
pub fn canonical_sql_text(s: &SqlQuery, t: &Table) -> String {
    let mut out = String::from(SELECT_TOKEN);
    out.push(' ');
    if let Some(agg) = s.agg_op {
        out.push_str(agg.token());
        out.push(' ');
    }
    out.push_str(&t.columns[s.sel_col].name);
    out.push(' ');
    out.push_str(WHERE_TOKEN);
    for (i, c) in s.conditions.iter().enumerate() {
        if i > 0 {
            out.push(' ');
            out.push_str(AND_TOKEN);
        }
        let attr = match c.target {
            CondTarget::Column(col) => t.columns[col].name.as_str(),
            CondTarget::Title => TITLE_ATTRIBUTE,
        };
        out.push(' ');
        out.push_str(attr);
        out.push(' ');
        out.push_str(c.op.token());
        out.push(' ');
        out.push_str(&c.value);
    }
    out
}

/// Stable id of a query: hash of its table and canonical text.
pub fn sql_id(table_id: &str, canonical: &str) -> String {
    let mut h = Fnv1a::default();
    h.write(table_id.as_bytes()).write(&[0]).write(canonical.as_bytes());
    format!("{:016x}", h.finish())
}

/// Set of canonical SQL strings already generated.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SqlDict {
    seen: BTreeSet<String>,
}

impl SqlDict {
    pub fn contains(&self, canonical: &str) -> bool {
        self.seen.contains(canonical)
    }

    pub fn insert(&mut self, canonical: String) -> bool {
        self.seen.insert(canonical)
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    /// Persists as a sorted text file, one canonical query per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for s in &self.seen {
            text.push_str(s);
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<SqlDict> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(SqlDict {
            seen: text.lines().filter(|l| !l.is_empty()).map(str::to_owned).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub batch_size: usize,
    pub max_cond_cols: usize,
    pub seed: u64,
    pub agg_probability: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            batch_size: 1000,
            max_cond_cols: 3,
            seed: 0,
            agg_probability: 0.2,
        }
    }
}

/// Seeded SQL sampler. Successive batches continue the same random stream.
pub struct SqlGenerator<'a> {
    collection: &'a TableCollection,
    table_ids: Vec<&'a str>,
    cfg: GenConfig,
    rng: ChaCha8Rng,
}

impl<'a> SqlGenerator<'a> {
    pub fn new(collection: &'a TableCollection, cfg: GenConfig) -> SqlGenerator<'a> {
        SqlGenerator {
            collection,
            table_ids: collection.ids().collect(),
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        }
    }

    /// One draw of the sampling procedure; `None` when the draw hits a table
    /// without usable columns or without good rows.
    fn draw(&mut self) -> Option<SqlQuery> {
        if self.table_ids.is_empty() {
            return None;
        }
        let tid = self.table_ids[self.rng.random_range(0..self.table_ids.len())];
        let (table, stats) = self.collection.table_and_stats(tid)?;
        let named = table.named_columns();
        if named.len() < 2 || self.cfg.max_cond_cols == 0 {
            return None;
        }
        let sel_col = named[self.rng.random_range(0..named.len())];
        let remaining: Vec<usize> = named.iter().copied().filter(|&c| c != sel_col).collect();
        let max_k = self.cfg.max_cond_cols.min(remaining.len());
        let k = self.rng.random_range(1..=max_k);
        let mut cond_cols: Vec<usize> = sample(&mut self.rng, remaining.len(), k)
            .into_iter()
            .map(|i| remaining[i])
            .collect();
        cond_cols.sort_unstable();
        let alpha = 1.0 / (cond_cols.len() as f64 + 1.0);
        let use_title = self.rng.random_bool(alpha) && !table.title.is_empty();
        let agg_op = if table.columns[sel_col].is_numeric() && self.rng.random_bool(self.cfg.agg_probability) {
            Some(AggOp::ALL[self.rng.random_range(0..AggOp::ALL.len())])
        } else {
            None
        };
        let good_rows: Vec<usize> = (0..table.n_rows())
            .filter(|&r| {
                cond_cols.iter().all(|&c| {
                    let cell = table.cell(r, c);
                    !cell.is_empty() && !is_outlier_cell(cell, stats)
                })
            })
            .collect();
        if good_rows.is_empty() {
            return None;
        }
        let row = good_rows[self.rng.random_range(0..good_rows.len())];
        let mut conditions: Vec<Condition> = cond_cols
            .iter()
            .map(|&c| {
                let op = if table.columns[c].is_numeric() {
                    CmpOp::ALL[self.rng.random_range(0..CmpOp::ALL.len())]
                } else {
                    CmpOp::Eq
                };
                Condition {
                    target: CondTarget::Column(c),
                    op,
                    value: table.cell(row, c).to_owned(),
                }
            })
            .collect();
        if use_title {
            conditions.push(Condition {
                target: CondTarget::Title,
                op: CmpOp::Eq,
                value: table.title.clone(),
            });
        }
        Some(SqlQuery {
            table_id: table.id.clone(),
            sel_col,
            agg_op,
            conditions,
            use_title,
            row,
        })
    }

    /// Samples until `batch_size` new queries are accepted into `dict`.
    pub fn next_batch(&mut self, dict: &mut SqlDict) -> Result<Vec<SqlQuery>> {
        let requested = self.cfg.batch_size;
        let max_attempts = requested.saturating_mul(1000);
        let mut accepted = Vec::with_capacity(requested);
        let mut attempts = 0;
        while accepted.len() < requested {
            if attempts >= max_attempts {
                return Err(Error::Exhausted {
                    attempts,
                    accepted: accepted.len(),
                    requested,
                    partial: accepted,
                });
            }
            attempts += 1;
            let Some(q) = self.draw() else { continue };
            let table = self.collection.get(&q.table_id).expect("sampled table exists");
            let canonical = canonical_sql_text(&q, table);
            if dict.insert(canonical) {
                accepted.push(q);
            }
        }
        Ok(accepted)
    }
}

/// Samples one batch of `cfg.batch_size` queries not already in `dict`.
pub fn generate_sqls(c: &TableCollection, cfg: &GenConfig, dict: &mut SqlDict) -> Result<Vec<SqlQuery>> {
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    SqlGenerator::new(c, *cfg).next_batch(dict)
}

/// Lower bound on the number of distinct queries for a collection of
/// `tables` tables with `rows` rows and `columns` columns, using up to
/// `max_cond_cols` condition columns and `agg_ops` aggregate choices:
/// `tables * rows * columns * agg_ops * sum_{k=0..=max_cond_cols} C(columns, k)`.
pub fn unique_sql_lower_bound(tables: u64, rows: u64, columns: u64, max_cond_cols: u64, agg_ops: u64) -> u64 {
    let subsets: u64 = (0..=max_cond_cols).map(|k| binomial(columns, k)).sum();
    tables * rows * columns * agg_ops * subsets
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// jsonl record emitted for each generated query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqlRecord {
    pub sql_id: String,
    pub table_id: String,
    pub canonical_text: String,
    pub query: SqlQuery,
}

impl SqlRecord {
    pub fn new(query: SqlQuery, table: &Table) -> SqlRecord {
        let canonical_text = canonical_sql_text(&query, table);
        SqlRecord {
            sql_id: sql_id(&query.table_id, &canonical_text),
            table_id: query.table_id.clone(),
            canonical_text,
            query,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::IngestReport;

    fn cities() -> Table {
        let names = ["Name", "City", "Population"].map(String::from);
        let rows = (0..20)
            .map(|i| vec![format!("Branch {i}"), format!("Town {}", i % 4), format!("{}", 1000 + i)])
            .collect();
        Table::from_raw("t", "Library Branches", &names, rows, &mut IngestReport::default())
    }

    #[test]
    fn canonical_text_uses_escape_tokens() {
        let t = cities();
        let q = SqlQuery {
            table_id: "t".into(),
            sel_col: 1,
            agg_op: None,
            conditions: vec![Condition {
                target: CondTarget::Column(0),
                op: CmpOp::Eq,
                value: "Albany Park".into(),
            }],
            use_title: false,
            row: 0,
        };
        assert_eq!(
            canonical_sql_text(&q, &t),
            "[S-E-L-E-C-T] City [W-H-E-R-E] Name [E-Q] Albany Park"
        );
        let q2 = SqlQuery {
            sel_col: 2,
            agg_op: Some(AggOp::Max),
            conditions: vec![
                q.conditions[0].clone(),
                Condition {
                    target: CondTarget::Title,
                    op: CmpOp::Eq,
                    value: "Library Branches".into(),
                },
            ],
            use_title: true,
            ..q.clone()
        };
        assert_eq!(
            canonical_sql_text(&q2, &t),
            "[S-E-L-E-C-T] [M-A-X] Population [W-H-E-R-E] Name [E-Q] Albany Park [A-N-D] About [E-Q] Library Branches"
        );
    }

    #[test]
    fn lower_bound_matches_worked_example() {
        assert_eq!(unique_sql_lower_bound(100, 12, 10, 3, 1), 2_112_000);
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn batches_are_unique_and_answerable() {
        let coll = TableCollection::from_tables([cities()]).unwrap();
        let mut dict = SqlDict::default();
        let cfg = GenConfig {
            batch_size: 50,
            seed: 3,
            ..GenConfig::default()
        };
        let batch = generate_sqls(&coll, &cfg, &mut dict).unwrap();
        assert_eq!(batch.len(), 50);
        assert_eq!(dict.len(), 50);
        let t = coll.get("t").unwrap();
        for q in &batch {
            for (col, c) in q.column_conditions() {
                assert_eq!(t.cell(q.row, col), c.value);
                assert_ne!(col, q.sel_col);
            }
            if q.agg_op.is_some() {
                assert!(t.columns[q.sel_col].is_numeric());
            }
        }
        let again = generate_sqls(&coll, &cfg, &mut dict).unwrap();
        let texts: BTreeSet<String> = batch.iter().chain(&again).map(|q| canonical_sql_text(q, t)).collect();
        assert_eq!(texts.len(), 100);
    }

    #[test]
    fn all_outlier_table_exhausts() {
        let names = ["a", "b"].map(String::from);
        let t = Table::from_raw(
            "x",
            "",
            &names,
            vec![vec!["p q".into(), "r s".into()]],
            &mut IngestReport::default(),
        );
        let coll = TableCollection::from_tables([t]).unwrap();
        // shrink the fence below every cell
        let mut json: serde_json::Value = serde_json::from_str(&coll.to_json()).unwrap();
        json["stats"]["x"]["upper_fence"] = serde_json::json!(1.0);
        let coll = TableCollection::from_json(&json.to_string()).unwrap();
        let cfg = GenConfig {
            batch_size: 2,
            ..GenConfig::default()
        };
        match generate_sqls(&coll, &cfg, &mut SqlDict::default()) {
            Err(Error::Exhausted { accepted, attempts, .. }) => {
                assert_eq!(accepted, 0);
                assert_eq!(attempts, 2000);
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn dict_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut d = SqlDict::default();
        d.insert("b".into());
        d.insert("a".into());
        let path = dir.path().join("dict.txt");
        d.save(&path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a\nb\n");
        assert_eq!(SqlDict::load(&path).unwrap(), d);
    }
}
