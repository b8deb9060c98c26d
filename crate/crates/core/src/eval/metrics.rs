//! Confusion matrices, per-state metrics and fold aggregation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::DeviationState;

const N: usize = DeviationState::COUNT;

/// Rows are true states, columns predicted states.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[u64; N]; N]);

impl ConfusionMatrix {
    pub fn from_sequences(truth: &[DeviationState], predicted: &[DeviationState]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                expected: truth.len(),
                actual: predicted.len(),
            });
        }
        let mut m = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            m.0[t.index()][p.index()] += 1;
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..N).map(|k| self.0[k][k]).sum()
    }

    pub fn row_total(&self, state: DeviationState) -> u64 {
        self.0[state.index()].iter().sum()
    }

    pub fn column_total(&self, state: DeviationState) -> u64 {
        self.0.iter().map(|row| row[state.index()]).sum()
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.correct() as f64 / total as f64)
    }

    /// `None` when the state never occurs.
    pub fn recall(&self, state: DeviationState) -> Option<f64> {
        let row = self.row_total(state);
        (row > 0).then(|| self.0[state.index()][state.index()] as f64 / row as f64)
    }

    /// `None` when the state is never predicted.
    pub fn precision(&self, state: DeviationState) -> Option<f64> {
        let column = self.column_total(state);
        (column > 0).then(|| self.0[state.index()][state.index()] as f64 / column as f64)
    }

    /// Fraction of instants whose true state is `state`.
    pub fn prevalence(&self, state: DeviationState) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.row_total(state) as f64 / total as f64)
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (row, other_row) in self.0.iter_mut().zip(&other.0) {
            for (a, b) in row.iter_mut().zip(other_row) {
                *a += b;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub accuracy: f64,
    pub recall: [Option<f64>; N],
    pub precision: [Option<f64>; N],
}

impl FoldMetrics {
    pub fn from_confusion(m: &ConfusionMatrix) -> Result<Self> {
        Ok(Self {
            accuracy: m.accuracy().ok_or(Error::Empty("confusion matrix is empty"))?,
            recall: DeviationState::ALL.map(|s| m.recall(s)),
            precision: DeviationState::ALL.map(|s| m.precision(s)),
        })
    }
}

/// Mean and Student-t 95% confidence interval over folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Folds that contributed a value.
    pub defined: usize,
    /// Folds where the metric was undefined and left out.
    pub undefined: usize,
}

impl MetricSummary {
    pub fn half_width(&self) -> Option<f64> {
        Some((self.ci_high? - self.ci_low?) / 2.0)
    }
}

/// `mean ± t(0.975, n − 1) · sd / √n` over the defined values. With fewer
/// than two values the interval is unavailable.
pub fn aggregate(values: &[Option<f64>]) -> MetricSummary {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    let n = defined.len();
    let mut summary = MetricSummary {
        mean: None,
        ci_low: None,
        ci_high: None,
        defined: n,
        undefined: values.len() - n,
    };
    if n == 0 {
        return summary;
    }
    let mean = defined.iter().sum::<f64>() / n as f64;
    summary.mean = Some(mean);
    if n < 2 {
        return summary;
    }
    let var = defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    let half = t * var.sqrt() / (n as f64).sqrt();
    summary.ci_low = Some(mean - half);
    summary.ci_high = Some(mean + half);
    summary
}
