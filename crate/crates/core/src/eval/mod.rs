//! Cross-validated evaluation, per-rate summaries, trend tests and the
//! error taxonomy.

pub mod errors;
pub mod kendall;
pub mod loocv;
pub mod metrics;

use serde::{Deserialize, Serialize};

use crate::ingest::SampleRate;
use crate::model::DeviationState;

pub use errors::{categorize_errors, ErrorBreakdown, ErrorCategory, ObservationRecord};
pub use kendall::{kendall_tau_trend, KendallTrend, BONFERRONI_ALPHA};
pub use loocv::{cohort_state_mix, loocv, loocv_sampled, EvalConfig, FoldOutcome, FoldResult};
pub use metrics::{aggregate, ConfusionMatrix, FoldMetrics, MetricSummary};

/// Aggregated results of every fold at one sampling rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub rate: SampleRate,
    pub folds: usize,
    pub accuracy: MetricSummary,
    pub recall: [MetricSummary; DeviationState::COUNT],
    pub precision: [MetricSummary; DeviationState::COUNT],
    /// Mean over folds of the true-state fraction of each state.
    pub state_mix: [f64; DeviationState::COUNT],
    pub errors: ErrorBreakdown,
}

pub fn summarize(rate: SampleRate, outcomes: &[FoldOutcome]) -> RateSummary {
    let metrics: Vec<&FoldMetrics> = outcomes.iter().map(|o| &o.result.metrics).collect();
    let per_state = |pick: &dyn Fn(&FoldMetrics) -> [Option<f64>; 3]| {
        DeviationState::ALL.map(|s| aggregate(&metrics.iter().map(|m| pick(m)[s.index()]).collect::<Vec<_>>()))
    };
    let mut state_mix = [0.0; 3];
    for o in outcomes {
        for s in DeviationState::ALL {
            state_mix[s.index()] += o.result.confusion.prevalence(s).unwrap_or(0.0) / outcomes.len() as f64;
        }
    }
    let records: Vec<ObservationRecord> = outcomes.iter().flat_map(|o| o.records.iter().copied()).collect();
    RateSummary {
        rate,
        folds: outcomes.len(),
        accuracy: aggregate(&metrics.iter().map(|m| Some(m.accuracy)).collect::<Vec<_>>()),
        recall: per_state(&|m| m.recall),
        precision: per_state(&|m| m.precision),
        state_mix,
        errors: categorize_errors(&records),
    }
}

/// One of the seven trend tests of a sweep: a metric's fold mean against
/// the sampling rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub metric: String,
    pub points: usize,
    pub outcome: Result<KendallTrend, String>,
}

/// Accuracy, then recall and precision for each state, in that order.
pub fn trend_tests(summaries: &[RateSummary]) -> Vec<TrendRow> {
    let mut series: Vec<(String, Vec<Option<f64>>)> =
        vec![("accuracy".into(), summaries.iter().map(|s| s.accuracy.mean).collect())];
    for (name, pick) in [
        (
            "recall",
            (|s: &RateSummary| s.recall) as fn(&RateSummary) -> [MetricSummary; 3],
        ),
        ("precision", |s: &RateSummary| s.precision),
    ] {
        for state in DeviationState::ALL {
            series.push((
                format!("{name}_{}", state.abbreviation()),
                summaries.iter().map(|s| pick(s)[state.index()].mean).collect(),
            ));
        }
    }
    series
        .into_iter()
        .map(|(metric, values)| {
            let (x, y): (Vec<f64>, Vec<f64>) = summaries
                .iter()
                .zip(values)
                .filter_map(|(s, v)| Some((s.rate.as_f64(), v?)))
                .unzip();
            TrendRow {
                metric,
                points: x.len(),
                outcome: kendall_tau_trend(&x, &y).map_err(|e| e.to_string()),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use DeviationState::*;

    #[test]
    fn accuracy_when_only_event_deviations_are_missed() {
        // All ND and CD instants right, nothing predicted as ED.
        for (nd, cd, ed) in [(68u64, 26u64, 6u64), (600, 300, 100), (10, 0, 1)] {
            let mut m = ConfusionMatrix::default();
            m.0[NoDeviation.index()][NoDeviation.index()] = nd;
            m.0[ContextDeviation.index()][ContextDeviation.index()] = cd;
            m.0[EventDeviation.index()][ContextDeviation.index()] = ed;
            let total = (nd + cd + ed) as f64;
            assert_eq!(m.accuracy().unwrap(), (nd + cd) as f64 / total);
            assert_eq!(m.accuracy().unwrap(), 1.0 - m.prevalence(EventDeviation).unwrap());
        }
    }

    fn summary(rate: u64, acc: f64) -> RateSummary {
        let m = aggregate(&[Some(acc), Some(acc)]);
        RateSummary {
            rate: SampleRate::hz(rate).unwrap(),
            folds: 2,
            accuracy: m,
            recall: [m; 3],
            precision: [m, m, aggregate(&[None])],
            state_mix: [1.0, 0.0, 0.0],
            errors: ErrorBreakdown::default(),
        }
    }

    #[test]
    fn seven_trend_rows() {
        let summaries: Vec<_> = (2..=6).map(|r| summary(r, r as f64 / 10.0)).collect();
        let rows = trend_tests(&summaries);
        assert_eq!(rows.len(), 7);
        assert_eq!(rows[0].metric, "accuracy");
        assert_eq!(rows[6].metric, "precision_ED");
        assert_eq!(rows[0].outcome.as_ref().unwrap().tau, 1.0);
        assert!(rows[6].outcome.is_err());
    }
}
