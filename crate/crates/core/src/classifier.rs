//! Deviation-type classifier: an HSMM over observation codes, trained on
//! deviation traces whose hidden states are known.

use serde::{Deserialize, Serialize};

use crate::consensus::{DeviationTrace, ObservationAlphabet};
use crate::error::{Error, Result};
use crate::hsmm::{self, DecodeMode, EmConfig, EmTrace, HsmmModel, TrainingConfig};
use crate::ingest::runs;
use crate::model::DeviationState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// `d_max` is this factor times the longest training run, capped at the
    /// longest training sequence.
    pub d_max_factor: f64,
    pub smoothing: f64,
    /// Baum–Welch refinement after supervised counting, when set.
    pub em: Option<EmConfig>,
    pub decode: DecodeMode,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            d_max_factor: 1.5,
            smoothing: 1.0,
            em: None,
            decode: DecodeMode::Viterbi,
        }
    }
}

pub fn d_max_for(state_seqs: &[Vec<usize>], factor: f64) -> usize {
    let longest_run = state_seqs
        .iter()
        .flat_map(|s| runs(s).map(|(a, b)| b - a))
        .max()
        .unwrap_or(1);
    let longest_seq = state_seqs.iter().map(Vec::len).max().unwrap_or(1);
    ((longest_run as f64 * factor).ceil() as usize)
        .min(longest_seq)
        .max(longest_run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationClassifier {
    /// Fingerprint of the activity vocabulary the alphabet refers to.
    pub vocabulary_fingerprint: String,
    pub alphabet: ObservationAlphabet,
    pub model: HsmmModel,
    pub decode: DecodeMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em_trace: Option<EmTrace>,
}

impl DeviationClassifier {
    /// Builds the observation alphabet from `traces`, counts parameters from
    /// their true states and optionally refines them with EM.
    pub fn train(traces: &[DeviationTrace], config: &ClassifierConfig) -> Result<Self> {
        if traces.is_empty() {
            return Err(Error::Empty("no training traces"));
        }
        if config.d_max_factor.is_nan() || config.d_max_factor < 1.0 {
            return Err(Error::Config("d_max factor must be at least 1".into()));
        }
        let mut alphabet = ObservationAlphabet::new();
        let obs: Vec<Vec<u32>> = traces.iter().map(|t| t.intern(&mut alphabet)).collect();
        let states: Vec<Vec<usize>> = traces
            .iter()
            .map(|t| t.true_states.iter().map(|s| s.index()).collect())
            .collect();
        let training = TrainingConfig {
            n_states: DeviationState::COUNT,
            alphabet_size: alphabet.size(),
            d_max: d_max_for(&states, config.d_max_factor),
            smoothing: config.smoothing,
        };
        let mut model = hsmm::estimate_supervised(&obs, &states, &training)?;
        let mut em_trace = None;
        if let Some(em) = &config.em {
            let (refined, trace) = hsmm::em_refine(&model, &obs, em)?;
            model = refined;
            em_trace = Some(trace);
        }
        Ok(Self {
            vocabulary_fingerprint: String::new(),
            alphabet,
            model,
            decode: config.decode,
            em_trace,
        })
    }

    pub fn with_fingerprint(mut self, fingerprint: String) -> Self {
        self.vocabulary_fingerprint = fingerprint;
        self
    }

    /// Observation codes of a trace; unknown types map to the unseen code.
    pub fn encode(&self, trace: &DeviationTrace) -> Vec<u32> {
        trace.lookup(&self.alphabet)
    }

    pub fn classify(&self, trace: &DeviationTrace) -> Result<Vec<DeviationState>> {
        let decoded = hsmm::decode(&self.model, &self.encode(trace), self.decode)?;
        Ok(decoded
            .states
            .into_iter()
            .map(|s| DeviationState::from_index(s).expect("three-state model"))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::ObservationSymbol;
    use crate::model::Activity;
    use DeviationState::*;

    fn trace(labels: &[(u16, u8, DeviationState)]) -> DeviationTrace {
        DeviationTrace {
            procedure_id: "p".into(),
            symbols: labels
                .iter()
                .map(|&(a, d, _)| ObservationSymbol {
                    activity: Activity::new(a, 1, 1),
                    distance: d,
                })
                .collect(),
            distances: labels.iter().map(|&(_, d, _)| d).collect(),
            true_states: labels.iter().map(|&(_, _, s)| s).collect(),
        }
    }

    #[test]
    fn d_max_rule() {
        assert_eq!(d_max_for(&[vec![0, 0, 0, 0, 1, 1]], 1.5), 6);
        assert_eq!(d_max_for(&[vec![0, 0, 1, 1, 2, 2, 2, 2, 2, 2]], 1.5), 9);
        assert_eq!(d_max_for(&[vec![0, 0, 0]], 1.0), 3);
    }

    #[test]
    fn separable_training_data_is_reproduced() {
        let t = trace(&[
            (1, 0, NoDeviation),
            (1, 0, NoDeviation),
            (2, 1, ContextDeviation),
            (2, 1, ContextDeviation),
            (1, 0, NoDeviation),
            (3, 3, EventDeviation),
            (3, 3, EventDeviation),
            (1, 0, NoDeviation),
        ]);
        let clf = DeviationClassifier::train(&[t.clone(), t.clone()], &ClassifierConfig::default()).unwrap();
        assert_eq!(clf.classify(&t).unwrap(), t.true_states);
        assert_eq!(clf.alphabet.size(), 4);
        let json = serde_json::to_string(&clf).unwrap();
        assert_eq!(serde_json::from_str::<DeviationClassifier>(&json).unwrap(), clf);
    }

    #[test]
    fn unseen_observations_are_still_classified() {
        let t = trace(&[(1, 0, NoDeviation), (2, 2, ContextDeviation), (1, 0, NoDeviation)]);
        let clf = DeviationClassifier::train(&[t], &ClassifierConfig::default()).unwrap();
        let novel = trace(&[(1, 0, NoDeviation), (9, 3, ContextDeviation), (1, 0, NoDeviation)]);
        assert_eq!(clf.encode(&novel)[1], ObservationAlphabet::UNSEEN);
        assert_eq!(clf.classify(&novel).unwrap().len(), 3);
    }
}
