//! Why instants were wrongly labelled as event deviations.
//!
//! Every instant predicted [`DeviationState::EventDeviation`] whose true
//! state differs is put in exactly one category, checked in this order:
//!
//! 1. `Untrained`: its observation type never occurred in that fold's
//!    training set.
//! 2. `RarelyWrong`: fewer than 1% of all test occurrences of the type
//!    (across every fold of the run) are misclassified.
//! 3. `CorrectlyTrained`: in training, the type was mostly seen as an event
//!    deviation.
//! 4. `Other`.
//!
//! An observation type is the full (verb, instrument, target, distance)
//! tuple.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::consensus::ObservationSymbol;
use crate::model::DeviationState;

pub const RARELY_WRONG_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    RarelyWrong,
    Untrained,
    CorrectlyTrained,
    Other,
}

/// One test instant with the training-side facts needed to categorise it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub fold: usize,
    pub t: usize,
    pub symbol: ObservationSymbol,
    /// Per-state counts of this type in the fold's training labels.
    pub training_counts: [u64; DeviationState::COUNT],
    pub truth: DeviationState,
    pub predicted: DeviationState,
}

impl ObservationRecord {
    pub fn seen_in_training(&self) -> bool {
        self.training_counts.iter().any(|&c| c > 0)
    }

    /// Most frequent training label; ties go to the lower state.
    pub fn training_majority(&self) -> Option<DeviationState> {
        if !self.seen_in_training() {
            return None;
        }
        let mut best = 0;
        for (k, &c) in self.training_counts.iter().enumerate() {
            if c > self.training_counts[best] {
                best = k;
            }
        }
        DeviationState::from_index(best)
    }

    pub fn is_false_event(&self) -> bool {
        self.predicted == DeviationState::EventDeviation && self.truth != DeviationState::EventDeviation
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub rarely_wrong: u64,
    pub untrained: u64,
    pub correctly_trained: u64,
    pub other: u64,
}

impl ErrorBreakdown {
    pub fn total(&self) -> u64 {
        self.rarely_wrong + self.untrained + self.correctly_trained + self.other
    }

    pub fn count(&self, category: ErrorCategory) -> u64 {
        match category {
            ErrorCategory::RarelyWrong => self.rarely_wrong,
            ErrorCategory::Untrained => self.untrained,
            ErrorCategory::CorrectlyTrained => self.correctly_trained,
            ErrorCategory::Other => self.other,
        }
    }

    fn bump(&mut self, category: ErrorCategory) {
        match category {
            ErrorCategory::RarelyWrong => self.rarely_wrong += 1,
            ErrorCategory::Untrained => self.untrained += 1,
            ErrorCategory::CorrectlyTrained => self.correctly_trained += 1,
            ErrorCategory::Other => self.other += 1,
        }
    }
}

/// Fraction of misclassified test occurrences per observation type.
pub fn misclassification_rates(records: &[ObservationRecord]) -> HashMap<ObservationSymbol, f64> {
    let mut tally: HashMap<ObservationSymbol, (u64, u64)> = HashMap::new();
    for r in records {
        let entry = tally.entry(r.symbol).or_default();
        entry.0 += u64::from(r.truth != r.predicted);
        entry.1 += 1;
    }
    tally
        .into_iter()
        .map(|(s, (wrong, all))| (s, wrong as f64 / all as f64))
        .collect()
}

pub fn categorize(record: &ObservationRecord, rates: &HashMap<ObservationSymbol, f64>) -> ErrorCategory {
    if !record.seen_in_training() {
        ErrorCategory::Untrained
    } else if rates.get(&record.symbol).is_some_and(|&r| r < RARELY_WRONG_THRESHOLD) {
        ErrorCategory::RarelyWrong
    } else if record.training_majority() == Some(DeviationState::EventDeviation) {
        ErrorCategory::CorrectlyTrained
    } else {
        ErrorCategory::Other
    }
}

/// Categorises every false event-deviation instant among `records`, which
/// should hold all test instants of a run so the per-type rates are right.
pub fn categorize_errors(records: &[ObservationRecord]) -> ErrorBreakdown {
    let rates = misclassification_rates(records);
    let mut breakdown = ErrorBreakdown::default();
    for r in records.iter().filter(|r| r.is_false_event()) {
        breakdown.bump(categorize(r, &rates));
    }
    breakdown
}
