//! Standard process construction, per-instant deviation detection and the
//! hidden-state / observation sequences the classifier is trained on.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::align::{dtw, unpack_indices, widths_from_blocks, AlignedSequence};
use crate::error::{Error, Result};
use crate::ingest::SampledSequence;
use crate::model::{Activity, DeviationState};

/// Per-instant majority of a set of aligned sequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandardProcess {
    pub labels: Vec<Activity>,
    /// Number of sequences carrying the chosen label at each instant.
    pub support: Vec<u32>,
}

impl StandardProcess {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn tally(aligned: &[AlignedSequence], t: usize) -> Vec<(Activity, u32)> {
    let mut counts: Vec<(Activity, u32)> = Vec::new();
    for s in aligned {
        let label = s.labels[t];
        match counts.iter_mut().find(|(a, _)| *a == label) {
            Some((_, n)) => *n += 1,
            None => counts.push((label, 1)),
        }
    }
    counts
}

/// Most frequent activity at every instant.
///
/// Ties go to the label chosen at the previous instant when it is among the
/// tied ones, then to the label with more support at the previous instant,
/// then to the lowest code triple.
pub fn standard_process(aligned: &[AlignedSequence]) -> Result<StandardProcess> {
    if aligned.len() < 2 {
        return Err(Error::Config(
            "a standard process needs at least two aligned sequences".into(),
        ));
    }
    let len = aligned[0].len();
    if let Some(s) = aligned.iter().find(|s| s.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            actual: s.len(),
        });
    }
    let mut labels = Vec::with_capacity(len);
    let mut support = Vec::with_capacity(len);
    let mut previous: Vec<(Activity, u32)> = Vec::new();
    for t in 0..len {
        let counts = tally(aligned, t);
        let top = counts.iter().map(|&(_, n)| n).max().unwrap_or(0);
        let tied: Vec<Activity> = counts.iter().filter(|&&(_, n)| n == top).map(|&(a, _)| a).collect();
        let earlier = |a: Activity| previous.iter().find(|(b, _)| *b == a).map_or(0, |&(_, n)| n);
        let chosen = match labels.last() {
            Some(&prev) if tied.contains(&prev) => prev,
            _ => *tied
                .iter()
                .max_by(|&&a, &&b| earlier(a).cmp(&earlier(b)).then(b.cmp(&a)))
                .expect("at least one label"),
        };
        labels.push(chosen);
        support.push(top);
        previous = counts;
    }
    Ok(StandardProcess { labels, support })
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}

/// Element-wise activity distance between the standard process and an
/// aligned sequence; a deviation is any non-zero entry.
pub fn deviation_distances(standard: &[Activity], sequence: &[Activity]) -> Result<Vec<u8>> {
    check_len(standard.len(), sequence.len())?;
    Ok(standard.iter().zip(sequence).map(|(&a, &b)| a.distance(b)).collect())
}

pub fn true_state(distance: u8, event: bool) -> DeviationState {
    match (distance, event) {
        (0, _) => DeviationState::NoDeviation,
        (_, false) => DeviationState::ContextDeviation,
        (_, true) => DeviationState::EventDeviation,
    }
}

pub fn true_states(distances: &[u8], event_mask: &[bool]) -> Result<Vec<DeviationState>> {
    check_len(distances.len(), event_mask.len())?;
    Ok(distances
        .iter()
        .zip(event_mask)
        .map(|(&d, &e)| true_state(d, e))
        .collect())
}

/// An aligned activity together with its distance to the standard process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObservationSymbol {
    pub activity: Activity,
    pub distance: u8,
}

/// Dense codes for observation symbols. Code 0 is reserved for symbols
/// that were never interned.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<ObservationSymbol>", into = "Vec<ObservationSymbol>")]
pub struct ObservationAlphabet {
    symbols: Vec<ObservationSymbol>,
    index: HashMap<ObservationSymbol, u32>,
}

impl From<Vec<ObservationSymbol>> for ObservationAlphabet {
    fn from(symbols: Vec<ObservationSymbol>) -> Self {
        let index = symbols.iter().enumerate().map(|(i, &s)| (s, i as u32 + 1)).collect();
        Self { symbols, index }
    }
}

impl From<ObservationAlphabet> for Vec<ObservationSymbol> {
    fn from(alphabet: ObservationAlphabet) -> Self {
        alphabet.symbols
    }
}

impl ObservationAlphabet {
    pub const UNSEEN: u32 = 0;

    pub fn new() -> Self {
        Self::default()
    }

    /// Number of codes including the reserved one.
    pub fn size(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn intern(&mut self, symbol: ObservationSymbol) -> u32 {
        if let Some(&code) = self.index.get(&symbol) {
            return code;
        }
        self.symbols.push(symbol);
        let code = self.symbols.len() as u32;
        self.index.insert(symbol, code);
        code
    }

    pub fn lookup(&self, symbol: ObservationSymbol) -> u32 {
        self.index.get(&symbol).copied().unwrap_or(Self::UNSEEN)
    }

    pub fn symbol(&self, code: u32) -> Option<ObservationSymbol> {
        code.checked_sub(1).and_then(|i| self.symbols.get(i as usize)).copied()
    }

    pub fn symbols(&self) -> &[ObservationSymbol] {
        &self.symbols
    }
}

pub fn observation_symbols(labels: &[Activity], distances: &[u8]) -> Result<Vec<ObservationSymbol>> {
    check_len(labels.len(), distances.len())?;
    Ok(labels
        .iter()
        .zip(distances)
        .map(|(&activity, &distance)| ObservationSymbol { activity, distance })
        .collect())
}

/// Observation codes of a sequence. With `grow` unknown symbols are added
/// to the alphabet; otherwise they map to [`ObservationAlphabet::UNSEEN`].
pub fn observations(
    labels: &[Activity],
    distances: &[u8],
    alphabet: &mut ObservationAlphabet,
    grow: bool,
) -> Result<Vec<u32>> {
    Ok(observation_symbols(labels, distances)?
        .into_iter()
        .map(|s| if grow { alphabet.intern(s) } else { alphabet.lookup(s) })
        .collect())
}

/// Everything derived from comparing one aligned sequence with a standard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationTrace {
    pub procedure_id: String,
    pub symbols: Vec<ObservationSymbol>,
    pub distances: Vec<u8>,
    pub true_states: Vec<DeviationState>,
}

impl DeviationTrace {
    pub fn new(standard: &[Activity], aligned: &AlignedSequence) -> Result<Self> {
        let distances = deviation_distances(standard, &aligned.labels)?;
        Ok(Self {
            procedure_id: aligned.procedure_id.clone(),
            symbols: observation_symbols(&aligned.labels, &distances)?,
            true_states: true_states(&distances, &aligned.event_mask)?,
            distances,
        })
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn intern(&self, alphabet: &mut ObservationAlphabet) -> Vec<u32> {
        self.symbols.iter().map(|&s| alphabet.intern(s)).collect()
    }

    pub fn lookup(&self, alphabet: &ObservationAlphabet) -> Vec<u32> {
        self.symbols.iter().map(|&s| alphabet.lookup(s)).collect()
    }
}

/// A held-out sequence placed on the time axis of a standard process.
#[derive(Debug, Clone)]
pub struct StandardAlignment {
    /// The standard process with each element repeated to its new width.
    pub standard: Vec<Activity>,
    pub aligned: AlignedSequence,
}

/// Aligns an unseen sequence to a standard process.
///
/// The standard is treated as the average sequence: DTW maps blocks of the
/// sequence onto its elements, widths are recomputed with the training
/// sequences contributing width 1 everywhere, and both the standard and the
/// sequence are unpacked to the new common length.
pub fn align_to_standard(standard: &StandardProcess, sequence: &SampledSequence) -> Result<StandardAlignment> {
    let (_, path) = dtw(&standard.labels, &sequence.labels)?;
    let own: Vec<_> = (0..standard.len()).map(|l| l..l + 1).collect();
    let alignment = widths_from_blocks(vec![own, path.blocks(standard.len())])?;
    let expanded = unpack_indices(&alignment.blocks[0], &alignment.widths)?;
    let indices = unpack_indices(&alignment.blocks[1], &alignment.widths)?;
    Ok(StandardAlignment {
        standard: expanded.iter().map(|&l| standard.labels[l]).collect(),
        aligned: AlignedSequence::from_indices(sequence, indices),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SampleRate;

    const A1: Activity = Activity::new(1, 1, 1);
    const A2: Activity = Activity::new(1, 2, 1);
    const A3: Activity = Activity::new(3, 3, 3);

    fn aligned(labels: &[Activity]) -> AlignedSequence {
        AlignedSequence {
            procedure_id: "p".into(),
            labels: labels.to_vec(),
            event_mask: vec![false; labels.len()],
            source_index: (0..labels.len()).collect(),
        }
    }

    #[test]
    fn majority_wins() {
        let std = standard_process(&[aligned(&[A1]), aligned(&[A1]), aligned(&[A2])]).unwrap();
        assert_eq!(std.labels, vec![A1]);
        assert_eq!(std.support, vec![2]);
    }

    #[test]
    fn identical_sequences_have_full_support() {
        let s = [A1, A2, A3];
        let std = standard_process(&[aligned(&s), aligned(&s), aligned(&s)]).unwrap();
        assert_eq!(std.labels, s);
        assert_eq!(std.support, vec![3, 3, 3]);
    }

    #[test]
    fn ties_follow_the_previous_choice() {
        // t=0: A2 wins 2-1. t=1: A1 and A2 tie 1-1 (plus A3 once). A2 was
        // chosen at t=0, so it is kept even though A1 has the lower code.
        let cohort = [aligned(&[A2, A1]), aligned(&[A2, A2]), aligned(&[A1, A3])];
        let std = standard_process(&cohort).unwrap();
        assert_eq!(std.labels, vec![A2, A2]);

        // t=1 ties A1/A3 while A2 was chosen at t=0. Support at t=0 is
        // A1:1, A3:2, so A3 wins despite its higher code.
        let cohort = [
            aligned(&[A2, A1]),
            aligned(&[A2, A3]),
            aligned(&[A1, A1]),
            aligned(&[A3, A3]),
            aligned(&[A3, A2]),
        ];
        let std = standard_process(&cohort).unwrap();
        assert_eq!(std.labels, vec![A2, A3]);

        // Equal support at t=0 as well: lowest code.
        let cohort = [
            aligned(&[A2, A1]),
            aligned(&[A2, A3]),
            aligned(&[A1, A1]),
            aligned(&[A3, A3]),
        ];
        let std = standard_process(&cohort).unwrap();
        assert_eq!(std.labels, vec![A2, A1]);

        // No history: lowest code triple.
        let std = standard_process(&[aligned(&[A3]), aligned(&[A1])]).unwrap();
        assert_eq!(std.labels, vec![A1]);
    }

    #[test]
    fn standard_process_preconditions() {
        assert!(standard_process(&[aligned(&[A1])]).is_err());
        assert!(matches!(
            standard_process(&[aligned(&[A1]), aligned(&[A1, A2])]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn distances_per_instant() {
        let std = [A1, A1, A1];
        assert_eq!(deviation_distances(&std, &std).unwrap(), vec![0, 0, 0]);
        assert_eq!(deviation_distances(&std, &[A1, A2, A3]).unwrap(), vec![0, 1, 3]);
        assert!(deviation_distances(&std, &[A1]).is_err());
    }

    #[test]
    fn hidden_state_rule() {
        use DeviationState::*;
        assert_eq!(true_state(0, true), NoDeviation);
        assert_eq!(true_state(2, false), ContextDeviation);
        assert_eq!(true_state(1, true), EventDeviation);
        assert_eq!(
            true_states(&[0, 1, 3, 0], &[false, false, true, true]).unwrap(),
            vec![NoDeviation, ContextDeviation, EventDeviation, NoDeviation]
        );
        assert!(true_states(&[0], &[]).is_err());
    }

    #[test]
    fn distance_is_part_of_the_observation() {
        let mut alphabet = ObservationAlphabet::new();
        let codes = observations(&[A1, A1, A1], &[0, 2, 0], &mut alphabet, true).unwrap();
        assert_eq!(codes[0], codes[2]);
        assert_ne!(codes[0], codes[1]);
        assert_eq!(
            alphabet.symbol(codes[0]),
            Some(ObservationSymbol {
                activity: A1,
                distance: 0
            })
        );
        assert_eq!(alphabet.size(), 3);
        let frozen = observations(&[A3], &[1], &mut alphabet, false).unwrap();
        assert_eq!(frozen, vec![ObservationAlphabet::UNSEEN]);
        assert_eq!(alphabet.size(), 3);
    }

    #[test]
    fn alphabet_round_trips_through_json() {
        let mut alphabet = ObservationAlphabet::new();
        alphabet.intern(ObservationSymbol {
            activity: A2,
            distance: 1,
        });
        alphabet.intern(ObservationSymbol {
            activity: A1,
            distance: 0,
        });
        let json = serde_json::to_string(&alphabet).unwrap();
        let back: ObservationAlphabet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, alphabet);
        assert_eq!(
            back.lookup(ObservationSymbol {
                activity: A1,
                distance: 0
            }),
            2
        );
    }

    #[test]
    fn held_out_sequence_is_stretched_with_the_standard() {
        let std = StandardProcess {
            labels: vec![A1, A2, A3],
            support: vec![2, 2, 2],
        };
        let seq = SampledSequence {
            procedure_id: "test".into(),
            rate: SampleRate::hz(2).unwrap(),
            labels: vec![A1, A2, A2, A2, A3],
            event_mask: vec![false, true, true, false, false],
        };
        let out = align_to_standard(&std, &seq).unwrap();
        assert_eq!(out.standard, vec![A1, A2, A2, A2, A3]);
        assert_eq!(out.aligned.labels, seq.labels);
        assert_eq!(out.aligned.event_mask, seq.event_mask);

        let short = SampledSequence {
            labels: vec![A1, A3],
            event_mask: vec![false; 2],
            ..seq
        };
        let out = align_to_standard(&std, &short).unwrap();
        assert_eq!(out.standard, vec![A1, A2, A3]);
        assert_eq!(out.aligned.labels.len(), 3);
    }
}
