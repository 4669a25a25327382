//! Table ingestion, column typing, cell-length statistics and schema
//! duplicate detection.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::text::{normalize_ws, token_count};
use crate::{Error, Result};

/// Share of non-empty cells that must parse as numbers for a numeric column.
pub const NUMERIC_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Numeric,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub inferred_type: ColumnType,
}

impl Column {
    pub fn is_named(&self) -> bool {
        !self.name.is_empty()
    }

    pub fn is_numeric(&self) -> bool {
        self.inferred_type == ColumnType::Numeric
    }
}

/// A relational table. Every row holds exactly one cell per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub id: String,
    pub title: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<String>>,
}

/// Counters describing how raw input was coerced into rectangular tables.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub tables: usize,
    pub padded: usize,
    pub truncated: usize,
    pub skipped_empty: usize,
}

impl Table {
    /// Builds a table from raw names and rows. Names and cells are
    /// whitespace-normalized, short rows are padded with empty cells and long
    /// rows truncated; the report counts both. Column types are inferred.
    pub fn from_raw(
        id: impl Into<String>,
        title: &str,
        names: &[String],
        raw_rows: Vec<Vec<String>>,
        report: &mut IngestReport,
    ) -> Table {
        let width = names.len();
        let rows = raw_rows
            .into_iter()
            .map(|row| {
                let mut row: Vec<String> = row.iter().map(|c| normalize_ws(c)).collect();
                if row.len() < width {
                    report.padded += 1;
                    row.resize(width, String::new());
                } else if row.len() > width {
                    report.truncated += 1;
                    row.truncate(width);
                }
                row
            })
            .collect();
        let columns = names
            .iter()
            .map(|n| Column {
                name: normalize_ws(n),
                inferred_type: ColumnType::Text,
            })
            .collect();
        let mut table = Table {
            id: id.into(),
            title: normalize_ws(title),
            columns,
            rows,
        };
        infer_column_types(&mut table);
        table
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> &str {
        &self.rows[row][col]
    }

    pub fn column_cells(&self, col: usize) -> impl Iterator<Item = &str> + '_ {
        self.rows.iter().map(move |r| r[col].as_str())
    }

    /// Indices of columns that carry a header name.
    pub fn named_columns(&self) -> Vec<usize> {
        (0..self.n_cols())
            .filter(|&c| self.columns[c].is_named())
            .collect()
    }
}

/// Parses a decimal number, tolerating thousands separators.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty()
        || !s
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E' | ','))
        || !s.chars().any(|c| c.is_ascii_digit())
    {
        return None;
    }
    let cleaned: String = s.chars().filter(|&c| c != ',').collect();
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Marks each column numeric iff at least 90% of its non-empty cells parse
/// as numbers and it has at least one non-empty cell.
pub fn infer_column_types(table: &mut Table) {
    for col in 0..table.n_cols() {
        let mut non_empty = 0usize;
        let mut numeric = 0usize;
        for cell in table.column_cells(col) {
            if cell.trim().is_empty() {
                continue;
            }
            non_empty += 1;
            if parse_number(cell).is_some() {
                numeric += 1;
            }
        }
        let is_numeric =
            non_empty > 0 && (numeric as f64) >= NUMERIC_THRESHOLD * (non_empty as f64);
        table.columns[col].inferred_type = if is_numeric {
            ColumnType::Numeric
        } else {
            ColumnType::Text
        };
    }
}

/// Interquartile statistics of cell token counts for one table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub q1: f64,
    pub q3: f64,
    pub upper_fence: f64,
}

impl CellStats {
    pub fn from_lengths(lengths: &[usize]) -> Option<CellStats> {
        if lengths.is_empty() {
            return None;
        }
        let mut sorted: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
        sorted.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&sorted, 0.25);
        let q3 = quantile_sorted(&sorted, 0.75);
        Some(CellStats {
            q1,
            q3,
            upper_fence: q3 + 1.5 * (q3 - q1),
        })
    }
}

/// Linear-interpolation quantile on sorted data (position `(n - 1) * p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Token-length statistics over every cell of the table.
pub fn compute_cell_stats(table: &Table) -> Result<CellStats> {
    let lengths: Vec<usize> = table
        .rows
        .iter()
        .flat_map(|r| r.iter().map(|c| token_count(c)))
        .collect();
    CellStats::from_lengths(&lengths).ok_or_else(|| Error::EmptyTable(table.id.clone()))
}

/// True iff the cell has more tokens than the table's upper fence.
pub fn is_outlier_cell(cell: &str, stats: &CellStats) -> bool {
    (token_count(cell) as f64) > stats.upper_fence
}

/// An id-indexed set of prepared tables with their cell statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableCollection {
    tables: BTreeMap<String, Table>,
    stats: BTreeMap<String, CellStats>,
}

impl TableCollection {
    /// Prepares a collection: types are re-inferred and statistics computed.
    pub fn from_tables(tables: impl IntoIterator<Item = Table>) -> Result<TableCollection> {
        let mut out = TableCollection::default();
        for mut table in tables {
            if out.tables.contains_key(&table.id) {
                return Err(Error::DuplicateTableId(table.id));
            }
            infer_column_types(&mut table);
            let stats = compute_cell_stats(&table)?;
            out.stats.insert(table.id.clone(), stats);
            out.tables.insert(table.id.clone(), table);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Table> {
        self.tables.get(id)
    }

    pub fn stats(&self, id: &str) -> Option<&CellStats> {
        self.stats.get(id)
    }

    /// Tables in id order.
    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        self.tables.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    pub fn table_and_stats(&self, id: &str) -> Option<(&Table, &CellStats)> {
        Some((self.tables.get(id)?, self.stats.get(id)?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("collection serializes")
    }

    pub fn from_json(s: &str) -> Result<TableCollection> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            path: "<collection>".into(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFormat {
    CsvDir,
    Jsonl,
}

#[derive(Debug, Deserialize)]
struct JsonlColumn {
    #[serde(default)]
    name: String,
}

#[derive(Debug, Deserialize)]
struct JsonlTable {
    id: String,
    #[serde(default)]
    title: String,
    columns: Vec<JsonlColumn>,
    #[serde(default)]
    rows: Vec<Vec<String>>,
}

/// Reads tables from a jsonl file or a directory of csv files (a single csv
/// file is also accepted) and prepares them.
pub fn ingest_tables(source: &Path, format: SourceFormat) -> Result<(TableCollection, IngestReport)> {
    let mut report = IngestReport::default();
    let tables = match format {
        SourceFormat::Jsonl => read_jsonl(source, &mut report)?,
        SourceFormat::CsvDir => read_csv_source(source, &mut report)?,
    };
    let mut kept = Vec::with_capacity(tables.len());
    for t in tables {
        if t.rows.is_empty() || t.columns.is_empty() {
            report.skipped_empty += 1;
        } else {
            kept.push(t);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyCollection);
    }
    report.tables = kept.len();
    Ok((TableCollection::from_tables(kept)?, report))
}

fn read_jsonl(path: &Path, report: &mut IngestReport) -> Result<Vec<Table>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonlTable = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", lineno + 1),
        })?;
        let names: Vec<String> = rec.columns.into_iter().map(|c| c.name).collect();
        out.push(Table::from_raw(rec.id, &rec.title, &names, rec.rows, report));
    }
    Ok(out)
}

fn read_csv_source(path: &Path, report: &mut IngestReport) -> Result<Vec<Table>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_file() {
        return Ok(vec![read_csv_file(path, report)?]);
    }
    let mut files: Vec<_> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    files.iter().map(|f| read_csv_file(f, report)).collect()
}

fn read_csv_file(path: &Path, report: &mut IngestReport) -> Result<Table> {
    let parse_err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_path(path)
        .map_err(parse_err)?;
    let names: Vec<String> = reader
        .headers()
        .map_err(parse_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(parse_err)?;
        rows.push(rec.iter().map(str::to_owned).collect());
    }
    let id = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let title = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Table::from_raw(id, &title, &names, rows, report))
}

/// Partition of table ids into exact-schema duplicate groups.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateGroups {
    groups: Vec<Vec<String>>,
    #[serde(skip)]
    by_table: HashMap<String, usize>,
}

impl DuplicateGroups {
    pub fn from_groups(groups: Vec<Vec<String>>) -> DuplicateGroups {
        let by_table = groups
            .iter()
            .enumerate()
            .flat_map(|(g, ids)| ids.iter().map(move |id| (id.clone(), g)))
            .collect();
        DuplicateGroups { groups, by_table }
    }

    pub fn groups(&self) -> &[Vec<String>] {
        &self.groups
    }

    pub fn group_of(&self, table_id: &str) -> Option<&[String]> {
        self.by_table
            .get(table_id)
            .map(|&g| self.groups[g].as_slice())
    }
}

fn schema_key(t: &Table) -> (String, Vec<String>) {
    (
        normalize_ws(&t.title).to_lowercase(),
        t.columns
            .iter()
            .map(|c| normalize_ws(&c.name).to_lowercase())
            .collect(),
    )
}

/// Groups tables whose normalized title and ordered column names are equal.
pub fn schema_duplicate_groups(c: &TableCollection) -> DuplicateGroups {
    let mut by_key: BTreeMap<(String, Vec<String>), Vec<String>> = BTreeMap::new();
    for t in c.tables() {
        by_key.entry(schema_key(t)).or_default().push(t.id.clone());
    }
    let mut groups: Vec<Vec<String>> = by_key.into_values().collect();
    for g in &mut groups {
        g.sort();
    }
    groups.sort();
    DuplicateGroups::from_groups(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn table(id: &str, title: &str, names: &[&str], rows: &[&[&str]]) -> Table {
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|s| s.to_string()).collect())
            .collect();
        Table::from_raw(id, title, &names, rows, &mut IngestReport::default())
    }

    fn single_column(cells: &[&str]) -> Table {
        let rows: Vec<&[&str]> = cells.iter().map(std::slice::from_ref).collect();
        table("t", "", &["c"], &rows)
    }

    #[test]
    fn numeric_inference() {
        assert!(single_column(&["1", "2", "3"]).columns[0].is_numeric());
        assert!(
            single_column(&["1", "x", "3", "4", "5", "6", "7", "8", "9", "10"]).columns[0].is_numeric()
        );
        assert!(
            !single_column(&["1", "x", "y", "4", "5", "6", "7", "8", "9", "10"]).columns[0].is_numeric()
        );
        assert!(!single_column(&["", ""]).columns[0].is_numeric());
        assert!(single_column(&["1,234", "-2.5", "", "3e2"]).columns[0].is_numeric());
        assert_eq!(parse_number("nan"), None);
        assert_eq!(parse_number("inf"), None);
    }

    #[test]
    fn quartiles_and_fence() {
        let s = CellStats::from_lengths(&[2, 2, 6, 6]).unwrap();
        assert_eq!((s.q1, s.q3, s.upper_fence), (2.0, 6.0, 12.0));
        let s = CellStats::from_lengths(&[5, 5, 5]).unwrap();
        assert_eq!(s.upper_fence, 5.0);
        let s = CellStats::from_lengths(&[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        assert!((s.q1 - 2.75).abs() < 1e-12);
        assert!((s.q3 - 6.25).abs() < 1e-12);
        assert!((s.upper_fence - 11.5).abs() < 1e-12);
        assert!(CellStats::from_lengths(&[]).is_none());
    }

    #[test]
    fn outlier_rule() {
        let stats = CellStats {
            q1: 2.0,
            q3: 6.0,
            upper_fence: 12.0,
        };
        let words = |n: usize| vec!["w"; n].join(" ");
        assert!(is_outlier_cell(&words(13), &stats));
        assert!(!is_outlier_cell(&words(12), &stats));
        assert!(!is_outlier_cell("", &stats));
    }

    #[test]
    fn empty_table_stats_error() {
        let t = table("e", "", &["a"], &[]);
        assert!(matches!(compute_cell_stats(&t), Err(Error::EmptyTable(_))));
    }

    #[test]
    fn duplicate_groups() {
        let a = table("a", "Libraries", &["Name", "City"], &[&["x", "y"]]);
        let b = table("b", " libraries ", &["name", "City"], &[&["z", "w"]]);
        let c = table("c", "Parks", &["Name", "City"], &[&["x", "y"]]);
        let coll = TableCollection::from_tables([a, b, c]).unwrap();
        let groups = schema_duplicate_groups(&coll);
        assert_eq!(groups.groups(), &[vec!["a".to_string(), "b".to_string()], vec!["c".to_string()]]);
        assert_eq!(groups.group_of("b").unwrap(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn ingest_jsonl_and_padding() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let mut f = fs::File::create(&path).unwrap();
        writeln!(
            f,
            r#"{{"id":"t1","title":"One","columns":[{{"name":"a"}},{{"name":"b"}},{{"name":"c"}}],"rows":[["1","2"],["1","2","3"]]}}"#
        )
        .unwrap();
        writeln!(f, r#"{{"id":"t2","title":"Two","columns":[{{"name":"x"}}],"rows":[["q"]]}}"#).unwrap();
        drop(f);
        let (coll, report) = ingest_tables(&path, SourceFormat::Jsonl).unwrap();
        assert_eq!(coll.len(), 2);
        assert_eq!(coll.ids().collect::<Vec<_>>(), vec!["t1", "t2"]);
        assert_eq!(report.padded, 1);
        assert_eq!(coll.get("t1").unwrap().rows[0], vec!["1", "2", ""]);
    }

    #[test]
    fn ingest_csv_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cities.csv");
        fs::write(&path, "a,b\n1,x\n2,y\n3,z\n").unwrap();
        let (coll, _) = ingest_tables(dir.path(), SourceFormat::CsvDir).unwrap();
        let t = coll.get("cities.csv").unwrap();
        assert_eq!(t.title, "cities");
        assert_eq!((t.n_cols(), t.n_rows()), (2, 3));
        assert!(t.columns[0].is_numeric());
        assert!(!t.columns[1].is_numeric());
    }

    #[test]
    fn ingest_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            ingest_tables(&dir.path().join("missing.jsonl"), SourceFormat::Jsonl),
            Err(Error::Io { .. })
        ));
        let empty = dir.path().join("empty.jsonl");
        fs::write(&empty, "\n").unwrap();
        assert!(matches!(
            ingest_tables(&empty, SourceFormat::Jsonl),
            Err(Error::EmptyCollection)
        ));
    }
}
