//! Precision-at-K evaluation over questions with known answer tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tabdisc_core::qgen::QuestionRecord;

use crate::engine::Engine;
use crate::Result;

/// `true` when any ground-truth table is among the first `k` of `ranked`.
pub fn hit_at(ranked: &[String], ground_truth: &[String], k: usize) -> bool {
    ranked.iter().take(k).any(|t| ground_truth.contains(t))
}

/// Fraction of `true` values; zero for an empty sequence.
pub fn ratio(hits: impl IntoIterator<Item = bool>) -> f64 {
    let (mut n, mut h) = (0usize, 0usize);
    for hit in hits {
        n += 1;
        h += usize::from(hit);
    }
    if n == 0 {
        0.0
    } else {
        h as f64 / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionEval {
    pub question_id: String,
    pub ground_truth: Vec<String>,
    /// Every retrieved table in second-stage order.
    pub ranked: Vec<String>,
    pub first_stage: Vec<String>,
}

impl QuestionEval {
    pub fn hit_at(&self, k: usize) -> bool {
        hit_at(&self.ranked, &self.ground_truth, k)
    }

    /// Whether an oracle second stage could place a ground-truth table first.
    pub fn hit_max(&self) -> bool {
        self.first_stage.iter().any(|t| self.ground_truth.contains(t))
    }
}

/// Summed per-question online durations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OnlineTiming {
    pub questions: usize,
    pub first_stage_seconds: f64,
    pub second_stage_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub questions: Vec<QuestionEval>,
    /// `P@k` for each requested cutoff, plus `P@Max`.
    pub precision: BTreeMap<String, f64>,
    #[serde(skip)]
    pub timing: OnlineTiming,
}

pub const P_MAX: &str = "P@Max";

pub fn p_key(k: usize) -> String {
    format!("P@{k}")
}

impl EvalReport {
    pub fn from_questions(questions: Vec<QuestionEval>, ks: &[usize], timing: OnlineTiming) -> EvalReport {
        let mut precision: BTreeMap<String, f64> = ks
            .iter()
            .map(|&k| (p_key(k), ratio(questions.iter().map(|q| q.hit_at(k)))))
            .collect();
        precision.insert(P_MAX.into(), ratio(questions.iter().map(QuestionEval::hit_max)));
        EvalReport {
            questions,
            precision,
            timing,
        }
    }

    pub fn p_at(&self, k: usize) -> Option<f64> {
        self.precision.get(&p_key(k)).copied()
    }

    pub fn p_max(&self) -> f64 {
        self.precision[P_MAX]
    }

    /// Report without timings, byte-stable across identical runs.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Ranks every record's question and scores the rankings.
pub fn evaluate(engine: &Engine, records: &[QuestionRecord], ks: &[usize]) -> Result<EvalReport> {
    let mut timing = OnlineTiming::default();
    let mut questions = Vec::with_capacity(records.len());
    for r in records {
        let ranking = engine.rank(&r.question)?;
        timing.questions += 1;
        timing.first_stage_seconds += ranking.first_stage_seconds;
        timing.second_stage_seconds += ranking.second_stage_seconds;
        questions.push(QuestionEval {
            question_id: r.question_id.clone(),
            ground_truth: r.ground_truth_table_ids.clone(),
            ranked: ranking.tables.into_iter().map(|t| t.table_id).collect(),
            first_stage: ranking.first_stage_tables,
        });
    }
    Ok(EvalReport::from_questions(questions, ks, timing))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(ranked: &[&str], gt: &[&str]) -> QuestionEval {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        QuestionEval {
            question_id: "q".into(),
            ground_truth: s(gt),
            ranked: s(ranked),
            first_stage: s(ranked),
        }
    }

    #[test]
    fn always_first_is_one() {
        let qs = vec![q(&["a", "b"], &["a"]), q(&["c"], &["c", "d"])];
        let r = EvalReport::from_questions(qs, &[1, 5], OnlineTiming::default());
        assert_eq!(r.p_at(1), Some(1.0));
        assert_eq!(r.p_at(5), Some(1.0));
        assert_eq!(r.p_max(), 1.0);
    }

    #[test]
    fn two_of_four_within_five() {
        let qs = vec![
            q(&["x", "y", "z", "w", "a"], &["a"]),
            q(&["b", "x"], &["b"]),
            q(&["x", "y", "z", "w", "v", "c"], &["c"]),
            q(&["x"], &["d"]),
        ];
        let r = EvalReport::from_questions(qs, &[1, 5], OnlineTiming::default());
        assert_eq!(r.p_at(5), Some(0.5));
        assert_eq!(r.p_at(1), Some(0.25));
        assert_eq!(r.p_max(), 0.75);
    }

    #[test]
    fn empty_is_zero() {
        let r = EvalReport::from_questions(Vec::new(), &[1], OnlineTiming::default());
        assert_eq!(r.p_at(1), Some(0.0));
        assert!(r.to_json().contains("P@Max"));
    }
}
