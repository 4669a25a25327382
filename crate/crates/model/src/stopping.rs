//! Patience-based early stopping shared by the epoch and dataset loops, and
//! the per-step cost report of incremental training.

use serde::{Deserialize, Serialize};

/// Tracks the best score seen. Only a strict increase counts as an
/// improvement; the loop stops once `patience + 1` consecutive observations
/// fail to improve.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStop {
    patience: usize,
    best: Option<f64>,
    misses: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStop {
    pub fn new(patience: usize) -> EarlyStop {
        EarlyStop {
            patience,
            best: None,
            misses: 0,
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn observe(&mut self, score: f64) -> Observation {
        let improved = self.best.is_none_or(|b| score > b);
        if improved {
            self.best = Some(score);
            self.misses = 0;
        } else {
            self.misses += 1;
        }
        Observation {
            improved,
            stop: self.misses > self.patience,
        }
    }
}

/// One dataset step of an incremental loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub dataset: usize,
    /// Datasets whose questions were presented during this step.
    pub trained_on: Vec<usize>,
    pub eval: f64,
    pub improved: bool,
    pub epochs: usize,
    /// Question presentations (training steps) across all epochs.
    pub presentations: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub steps: Vec<StepReport>,
}

impl CostReport {
    pub fn push(&mut self, step: StepReport) {
        self.steps.push(step);
    }

    pub fn total_presentations(&self) -> u64 {
        self.steps.iter().map(|s| s.presentations).sum()
    }

    pub fn total_epochs(&self) -> usize {
        self.steps.iter().map(|s| s.epochs).sum()
    }

    pub fn total_seconds(&self) -> f64 {
        self.steps.iter().map(|s| s.seconds).sum()
    }
}
