//! Leave-one-out cross-validation over a cohort at one sampling rate.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{align_cohort, AlignConfig, PairwiseCosts};
use crate::classifier::{ClassifierConfig, DeviationClassifier};
use crate::consensus::{align_to_standard, standard_process, DeviationTrace, ObservationSymbol};
use crate::error::{Error, Result};
use crate::eval::errors::ObservationRecord;
use crate::eval::metrics::{ConfusionMatrix, FoldMetrics};
use crate::ingest::{sample, ContinuousSpm, SampleRate, SampledSequence};
use crate::model::{Activity, DeviationState};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub align: AlignConfig,
    pub classifier: ClassifierConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub procedure_id: String,
    pub rate: SampleRate,
    pub confusion: ConfusionMatrix,
    pub metrics: FoldMetrics,
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub result: FoldResult,
    /// Deviation trace of the held-out procedure against the training standard.
    pub trace: DeviationTrace,
    pub observation_codes: Vec<u32>,
    pub predicted: Vec<DeviationState>,
    pub records: Vec<ObservationRecord>,
}

fn training_histogram(traces: &[DeviationTrace]) -> HashMap<ObservationSymbol, [u64; 3]> {
    let mut hist: HashMap<ObservationSymbol, [u64; 3]> = HashMap::new();
    for trace in traces {
        for (&symbol, &state) in trace.symbols.iter().zip(&trace.true_states) {
            hist.entry(symbol).or_default()[state.index()] += 1;
        }
    }
    hist
}

/// One fold: align and build the standard process from the training
/// sequences, train the classifier on their traces, then place the held-out
/// sequence on the standard's time axis and classify it.
fn run_fold(
    sequences: &[SampledSequence],
    held_out: usize,
    pairwise: &PairwiseCosts,
    config: &EvalConfig,
) -> Result<FoldOutcome> {
    let train_ids: Vec<usize> = (0..sequences.len()).filter(|&i| i != held_out).collect();
    let training: Vec<SampledSequence> = train_ids.iter().map(|&i| sequences[i].clone()).collect();
    let cohort = align_cohort(&training, &config.align, Some((pairwise, &train_ids)))?;
    let standard = standard_process(&cohort.aligned)?;
    let train_traces = cohort
        .aligned
        .iter()
        .map(|a| DeviationTrace::new(&standard.labels, a))
        .collect::<Result<Vec<_>>>()?;
    let classifier = DeviationClassifier::train(&train_traces, &config.classifier)?;

    let test = &sequences[held_out];
    let placed = align_to_standard(&standard, test)?;
    let trace = DeviationTrace::new(&placed.standard, &placed.aligned)?;
    let observation_codes = classifier.encode(&trace);
    let predicted = classifier.classify(&trace)?;
    let confusion = ConfusionMatrix::from_sequences(&trace.true_states, &predicted)?;

    let hist = training_histogram(&train_traces);
    let records = trace
        .symbols
        .iter()
        .zip(trace.true_states.iter().zip(&predicted))
        .enumerate()
        .map(|(t, (&symbol, (&truth, &predicted)))| ObservationRecord {
            fold: held_out,
            t,
            symbol,
            training_counts: hist.get(&symbol).copied().unwrap_or_default(),
            truth,
            predicted,
        })
        .collect();

    Ok(FoldOutcome {
        result: FoldResult {
            fold: held_out,
            procedure_id: test.procedure_id.clone(),
            rate: test.rate,
            metrics: FoldMetrics::from_confusion(&confusion)?,
            confusion,
        },
        trace,
        observation_codes,
        predicted,
        records,
    })
}

/// Leave-one-out over already sampled sequences (all at one rate).
pub fn loocv_sampled(sequences: &[SampledSequence], config: &EvalConfig) -> Result<Vec<FoldOutcome>> {
    if sequences.len() < 3 {
        return Err(Error::Config(format!(
            "leave-one-out needs at least 3 procedures, got {}",
            sequences.len()
        )));
    }
    let labels: Vec<&[Activity]> = sequences.iter().map(|s| s.labels.as_slice()).collect();
    let pairwise = PairwiseCosts::compute(&labels)?;
    (0..sequences.len())
        .into_par_iter()
        .map(|i| {
            run_fold(sequences, i, &pairwise, config).map_err(|e| Error::Fold {
                fold: i,
                procedure: sequences[i].procedure_id.clone(),
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn loocv(cohort: &[ContinuousSpm], rate: SampleRate, config: &EvalConfig) -> Result<Vec<FoldOutcome>> {
    let sampled = cohort.iter().map(|spm| sample(spm, rate)).collect::<Result<Vec<_>>>()?;
    loocv_sampled(&sampled, config)
}

/// Mean over procedures of the fraction of instants in each true state,
/// with the whole cohort aligned against its own standard process.
pub fn cohort_state_mix(sequences: &[SampledSequence], align: &AlignConfig) -> Result<[f64; 3]> {
    let cohort = align_cohort(sequences, align, None)?;
    let standard = standard_process(&cohort.aligned)?;
    let mut mix = [0.0; 3];
    for aligned in &cohort.aligned {
        let trace = DeviationTrace::new(&standard.labels, aligned)?;
        for state in &trace.true_states {
            mix[state.index()] += 1.0 / trace.len() as f64;
        }
    }
    Ok(mix.map(|m| m / sequences.len() as f64))
}
