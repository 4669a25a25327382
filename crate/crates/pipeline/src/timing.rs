//! Step durations in the categories of the offline/online time table.

use serde::{Deserialize, Serialize};

use crate::artifacts::{Artifacts, Stage};
use crate::eval::OnlineTiming;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Offline,
    Online,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub mode: Mode,
    pub step: String,
    /// Total seconds, or seconds per question when `per_question` is set.
    pub seconds: f64,
    pub per_question: bool,
    pub count: u64,
    pub unit: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
}

pub const OFFLINE_STEPS: [&str; 6] = [
    "Encoding tables",
    "Indexing triple vectors",
    "SQL generation",
    "Question generation from SQL",
    "Collecting positive/negative triples",
    "Training second-stage model",
];

pub const ONLINE_STEPS: [&str; 3] = ["First-stage retrieval", "Second-stage ranking", "Total"];

fn per(seconds: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        seconds / n as f64
    }
}

impl TimingReport {
    pub fn row(&self, step: &str) -> Option<&TimingRow> {
        self.rows.iter().find(|r| r.step == step)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("mode     step                                   time          count\n");
        for r in &self.rows {
            let mode = match r.mode {
                Mode::Offline => "offline",
                Mode::Online => "online",
            };
            let time = if r.per_question {
                format!("{:.4} s/q", r.seconds)
            } else {
                format!("{:.3} s", r.seconds)
            };
            out.push_str(&format!("{mode:<8} {:<38} {time:<13} {} {}\n", r.step, r.count, r.unit));
        }
        out
    }
}

/// Six offline rows from stage records and three online rows from an
/// evaluation pass.
pub fn timing_report(art: &Artifacts, online: &OnlineTiming) -> Result<TimingReport> {
    let rec = |s: Stage| art.require(s);
    let count = |r: &crate::artifacts::StageRecord, key: &str| r.counts.get(key).copied().unwrap_or(0);
    let (prepare, triples, encode) = (rec(Stage::Prepare)?, rec(Stage::Triples)?, rec(Stage::Encode)?);
    let (index, gen_sql, gen_q) = (rec(Stage::Index)?, rec(Stage::GenSql)?, rec(Stage::GenQuestions)?);
    let (collect, train) = (rec(Stage::Collect)?, rec(Stage::Train)?);
    let offline = |step: usize, seconds: f64, per_question: bool, count: u64, unit: &str| TimingRow {
        mode: Mode::Offline,
        step: OFFLINE_STEPS[step].into(),
        seconds,
        per_question,
        count,
        unit: unit.into(),
    };
    let retrieved = count(&collect, "questions_retrieved");
    let n = online.questions as u64;
    let first = per(online.first_stage_seconds, n);
    let second = per(online.second_stage_seconds, n);
    let online_row = |step: usize, seconds: f64| TimingRow {
        mode: Mode::Online,
        step: ONLINE_STEPS[step].into(),
        seconds,
        per_question: true,
        count: n,
        unit: "questions".into(),
    };
    Ok(TimingReport {
        rows: vec![
            offline(0, triples.seconds + encode.seconds, false, count(&prepare, "tables"), "tables"),
            offline(1, index.seconds, false, count(&index, "vectors"), "vectors"),
            offline(2, gen_sql.seconds, false, count(&gen_sql, "sqls"), "SQLs"),
            offline(3, gen_q.seconds, false, count(&gen_q, "questions"), "questions"),
            offline(4, per(collect.seconds, retrieved), true, retrieved, "questions"),
            offline(5, train.seconds, false, count(&train, "steps"), "steps"),
            online_row(0, first),
            online_row(1, second),
            online_row(2, first + second),
        ],
    })
}
