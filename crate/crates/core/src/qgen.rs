//! SQL to natural-language question translation and ground-truth
//! assignment.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{DuplicateGroups, Table};
use crate::sqlgen::{AggOp, CmpOp, CondTarget, SqlQuery};
use crate::{Error, Result};

const PLAIN_TEMPLATES: [&str; 3] = [
    "what is the {sel} of the one whose {conds}{title}?",
    "which {sel} belongs to the one whose {conds}{title}?",
    "tell me the {sel} of the one whose {conds}{title}?",
];

const AGG_TEMPLATES: [&str; 2] = [
    "what is the {agg} {sel} where {conds}{title}?",
    "what was the {agg} {sel} when {conds}{title}?",
];

fn agg_word(op: AggOp) -> &'static str {
    match op {
        AggOp::Max => "maximum",
        AggOp::Min => "minimum",
        AggOp::Count => "number",
        AggOp::Sum => "total",
        AggOp::Avg => "average",
    }
}

fn op_phrase(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Eq => "is",
        CmpOp::Lt => "is less than",
        CmpOp::Gt => "is greater than",
    }
}

/// Deterministic template realization. `seed` picks the template variant;
/// every condition value appears verbatim and column names lowercased.
pub fn template_translate(s: &SqlQuery, t: &Table, seed: u64) -> String {
    let conds = s
        .column_conditions()
        .map(|(col, c)| {
            format!(
                "{} {} {}",
                t.columns[col].name.to_lowercase(),
                op_phrase(c.op),
                c.value
            )
        })
        .collect::<Vec<_>>()
        .join(" and ");
    let title = s
        .conditions
        .iter()
        .find(|c| c.target == CondTarget::Title)
        .map(|c| format!(" in {}", c.value))
        .unwrap_or_default();
    let sel = t.columns[s.sel_col].name.to_lowercase();
    let template = match s.agg_op {
        Some(_) => AGG_TEMPLATES[(seed % AGG_TEMPLATES.len() as u64) as usize],
        None => PLAIN_TEMPLATES[(seed % PLAIN_TEMPLATES.len() as u64) as usize],
    };
    template
        .replace("{agg}", s.agg_op.map_or("", agg_word))
        .replace("{sel}", &sel)
        .replace("{conds}", &conds)
        .replace("{title}", &title)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Template,
    External,
}

/// A synthetic question with the tables that answer it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub question_id: String,
    pub question: String,
    pub sql_id: String,
    pub ground_truth_table_ids: Vec<String>,
    pub provenance: Provenance,
}

/// The duplicate group of the query's source table.
pub fn assign_ground_truth(s: &SqlQuery, groups: &DuplicateGroups) -> Vec<String> {
    match groups.group_of(&s.table_id) {
        Some(g) => g.to_vec(),
        None => vec![s.table_id.clone()],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslatorConfig {
    pub url: String,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_batch")]
    pub max_batch: usize,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    200
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_max_batch() -> usize {
    32
}
fn default_parallelism() -> usize {
    4
}

impl TranslatorConfig {
    pub fn new(url: impl Into<String>) -> TranslatorConfig {
        TranslatorConfig {
            url: url.into(),
            retries: default_retries(),
            backoff_ms: default_backoff_ms(),
            timeout_ms: default_timeout_ms(),
            max_batch: default_max_batch(),
            parallelism: default_parallelism(),
        }
    }
}

#[derive(Serialize)]
struct TranslateRequest<'a> {
    sqls: &'a [String],
}

#[derive(Deserialize)]
struct TranslateResponse {
    questions: Vec<Option<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Translation {
    pub question: String,
    pub provenance: Provenance,
}

enum Failure {
    /// The server answered but not usefully (status error, bad body).
    Rejected,
    /// No response at all.
    Unreachable(String),
}

struct TranslatorClient<'a> {
    cfg: &'a TranslatorConfig,
    client: reqwest::blocking::Client,
}

impl TranslatorClient<'_> {
    fn attempt(&self, sqls: &[String]) -> std::result::Result<Vec<Option<String>>, Failure> {
        let resp = self
            .client
            .post(&self.cfg.url)
            .json(&TranslateRequest { sqls })
            .send()
            .map_err(|e| Failure::Unreachable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(Failure::Rejected);
        }
        let body: TranslateResponse = resp.json().map_err(|_| Failure::Rejected)?;
        if body.questions.len() != sqls.len() {
            return Err(Failure::Rejected);
        }
        Ok(body.questions)
    }

    fn with_retries(&self, sqls: &[String]) -> std::result::Result<Vec<Option<String>>, Failure> {
        let mut last = Failure::Rejected;
        for attempt in 0..=self.cfg.retries {
            if attempt > 0 {
                thread::sleep(Duration::from_millis(self.cfg.backoff_ms << (attempt - 1)));
            }
            match self.attempt(sqls) {
                Ok(q) => return Ok(q),
                Err(f) => last = f,
            }
        }
        Err(last)
    }

    /// Translates one chunk; a rejected chunk is retried item by item.
    fn chunk(&self, sqls: &[String]) -> Result<Vec<Option<String>>> {
        match self.with_retries(sqls) {
            Ok(q) => Ok(q),
            Err(Failure::Unreachable(msg)) => Err(Error::Transport(msg)),
            Err(Failure::Rejected) if sqls.len() == 1 => Ok(vec![None]),
            Err(Failure::Rejected) => {
                let mut out = Vec::with_capacity(sqls.len());
                for s in sqls {
                    out.extend(self.chunk(std::slice::from_ref(s))?);
                }
                Ok(out)
            }
        }
    }
}

/// Sends canonical SQL texts to an external translator, preserving order.
/// Items that still fail after retries use `fallback(i)` and are marked
/// [`Provenance::Template`]; an unreachable endpoint is a transport error.
pub fn external_translate(
    sqls: &[String],
    cfg: &TranslatorConfig,
    fallback: impl Fn(usize) -> String,
) -> Result<Vec<Translation>> {
    if sqls.is_empty() {
        return Ok(Vec::new());
    }
    let client = TranslatorClient {
        cfg,
        client: reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?,
    };
    let chunks: Vec<&[String]> = sqls.chunks(cfg.max_batch.max(1)).collect();
    let mut answers: Vec<Option<String>> = Vec::with_capacity(sqls.len());
    for wave in chunks.chunks(cfg.parallelism.max(1)) {
        let results: Vec<Result<Vec<Option<String>>>> = thread::scope(|scope| {
            let handles: Vec<_> = wave
                .iter()
                .map(|chunk| scope.spawn(|| client.chunk(chunk)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("translator worker panicked"))
                .collect()
        });
        for r in results {
            answers.extend(r?);
        }
    }
    Ok(answers
        .into_iter()
        .enumerate()
        .map(|(i, a)| match a.filter(|q| !q.trim().is_empty()) {
            Some(question) => Translation {
                question,
                provenance: Provenance::External,
            },
            None => Translation {
                question: fallback(i),
                provenance: Provenance::Template,
            },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::IngestReport;
    use crate::sqlgen::Condition;

    fn table() -> Table {
        let names = ["Name", "City", "Status", "Visits"].map(String::from);
        Table::from_raw(
            "libs",
            "Chicago Public Libraries",
            &names,
            vec![vec!["Albany Park".into(), "Chicago".into(), "open".into(), "12".into()]],
            &mut IngestReport::default(),
        )
    }

    fn eq(col: usize, v: &str) -> Condition {
        Condition {
            target: CondTarget::Column(col),
            op: CmpOp::Eq,
            value: v.into(),
        }
    }

    #[test]
    fn plain_template() {
        let q = SqlQuery {
            table_id: "libs".into(),
            sel_col: 1,
            agg_op: None,
            conditions: vec![eq(0, "Albany Park")],
            use_title: false,
            row: 0,
        };
        assert_eq!(
            template_translate(&q, &table(), 0),
            "what is the city of the one whose name is Albany Park?"
        );
        assert_eq!(template_translate(&q, &table(), 7), template_translate(&q, &table(), 7));
    }

    #[test]
    fn aggregate_and_title() {
        let q = SqlQuery {
            table_id: "libs".into(),
            sel_col: 3,
            agg_op: Some(AggOp::Count),
            conditions: vec![
                eq(2, "open"),
                Condition {
                    target: CondTarget::Title,
                    op: CmpOp::Eq,
                    value: "Chicago Public Libraries".into(),
                },
            ],
            use_title: true,
            row: 0,
        };
        let text = template_translate(&q, &table(), 0);
        assert!(text.contains("number"));
        assert!(text.contains("open"));
        assert!(text.ends_with(" in Chicago Public Libraries?"), "{text}");
        let lt = SqlQuery {
            agg_op: None,
            conditions: vec![Condition {
                op: CmpOp::Lt,
                ..eq(3, "12")
            }],
            ..q
        };
        assert!(template_translate(&lt, &table(), 0).contains("visits is less than 12"));
    }

    #[test]
    fn ground_truth_from_groups() {
        let groups = DuplicateGroups::from_groups(vec![vec!["a".into(), "b".into()], vec!["c".into()]]);
        let mk = |id: &str| SqlQuery {
            table_id: id.into(),
            sel_col: 0,
            agg_op: None,
            conditions: vec![],
            use_title: false,
            row: 0,
        };
        assert_eq!(assign_ground_truth(&mk("c"), &groups), vec!["c"]);
        assert_eq!(assign_ground_truth(&mk("a"), &groups), vec!["a", "b"]);
        assert_eq!(assign_ground_truth(&mk("a"), &groups), assign_ground_truth(&mk("b"), &groups));
    }

    #[test]
    fn empty_batch_needs_no_endpoint() {
        let cfg = TranslatorConfig::new("http://127.0.0.1:9/unused");
        assert!(external_translate(&[], &cfg, |_| String::new()).unwrap().is_empty());
    }
}
