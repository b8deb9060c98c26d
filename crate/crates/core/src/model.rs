//! Shared domain types: activities, their vocabulary and the deviation states.
//!
//! Activities are triples of interned symbol codes (action verb, instrument,
//! anatomic target). Code 0 in every dimension is the reserved [`IDLE`]
//! symbol, so a gap in an annotation is an ordinary, comparable value.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Name of the reserved "no activity" symbol, code 0 in every dimension.
pub const IDLE: &str = "IDLE";

/// Number of symbolic components in an [`Activity`].
pub const DIMENSIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Verb,
    Instrument,
    Target,
}

impl Dimension {
    pub const ALL: [Dimension; DIMENSIONS] = [Dimension::Verb, Dimension::Instrument, Dimension::Target];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Verb => "verb",
            Dimension::Instrument => "instrument",
            Dimension::Target => "target",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An interned symbol tagged with the dimension it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Symbol {
    pub dimension: Dimension,
    pub code: u16,
}

impl Symbol {
    pub fn new(dimension: Dimension, code: u16) -> Self {
        Self { dimension, code }
    }

    pub fn idle(dimension: Dimension) -> Self {
        Self { dimension, code: 0 }
    }

    pub fn is_idle(self) -> bool {
        self.code == 0
    }
}

/// Mismatch distance between two symbols of the same dimension: 0 when
/// equal, 1 otherwise.
pub fn component_distance(a: Symbol, b: Symbol) -> Result<u8> {
    if a.dimension != b.dimension {
        return Err(Error::VocabularyMismatch(format!(
            "cannot compare a {} symbol with a {} symbol",
            a.dimension, b.dimension
        )));
    }
    Ok(u8::from(a.code != b.code))
}

/// One surgeon activity as a triple of symbol codes.
///
/// The derived ordering is the lexicographic order of the code triple, which
/// is what every deterministic tie-break in the crate relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Activity {
    pub verb: u16,
    pub instrument: u16,
    pub target: u16,
}

impl Activity {
    pub const IDLE: Activity = Activity {
        verb: 0,
        instrument: 0,
        target: 0,
    };

    pub const fn new(verb: u16, instrument: u16, target: u16) -> Self {
        Self {
            verb,
            instrument,
            target,
        }
    }

    pub fn codes(self) -> [u16; DIMENSIONS] {
        [self.verb, self.instrument, self.target]
    }

    pub fn from_codes(codes: [u16; DIMENSIONS]) -> Self {
        Self::new(codes[0], codes[1], codes[2])
    }

    pub fn component(self, dimension: Dimension) -> Symbol {
        Symbol::new(dimension, self.codes()[dimension.index()])
    }

    pub fn is_idle(self) -> bool {
        self == Activity::IDLE
    }

    /// Multi-dimensional distance: the number of components that differ.
    #[inline]
    pub fn distance(self, other: Activity) -> u8 {
        u8::from(self.verb != other.verb)
            + u8::from(self.instrument != other.instrument)
            + u8::from(self.target != other.target)
    }
}

/// Sum of the per-dimension [`component_distance`]s, checked against the
/// vocabulary both activities are supposed to come from.
pub fn activity_distance(vocabulary: &Vocabulary, q: Activity, c: Activity) -> Result<u8> {
    vocabulary.check(q)?;
    vocabulary.check(c)?;
    Dimension::ALL.iter().try_fold(0u8, |acc, &dim| {
        Ok(acc + component_distance(q.component(dim), c.component(dim))?)
    })
}

/// Per-dimension ordered symbol lists with dense integer codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    symbols: [Vec<String>; DIMENSIONS],
    index: [HashMap<String, u16>; DIMENSIONS],
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    verb: Vec<String>,
    instrument: Vec<String>,
    target: Vec<String>,
}

impl TryFrom<VocabularyFile> for Vocabulary {
    type Error = Error;

    fn try_from(file: VocabularyFile) -> Result<Self> {
        Vocabulary::from_lists([file.verb, file.instrument, file.target])
    }
}

impl From<Vocabulary> for VocabularyFile {
    fn from(vocabulary: Vocabulary) -> Self {
        let [verb, instrument, target] = vocabulary.symbols;
        VocabularyFile {
            verb,
            instrument,
            target,
        }
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    /// A vocabulary holding only the IDLE symbol in each dimension.
    pub fn new() -> Self {
        let symbols: [Vec<String>; DIMENSIONS] = std::array::from_fn(|_| vec![IDLE.to_string()]);
        let index = std::array::from_fn(|_| HashMap::from([(IDLE.to_string(), 0)]));
        Self { symbols, index }
    }

    /// Builds a vocabulary from per-dimension lists. Each list must start
    /// with [`IDLE`] and contain no duplicates.
    pub fn from_lists(lists: [Vec<String>; DIMENSIONS]) -> Result<Self> {
        let mut vocabulary = Self::new();
        for (dim, list) in Dimension::ALL.into_iter().zip(lists) {
            if list.first().map(String::as_str) != Some(IDLE) {
                return Err(Error::Config(format!("{dim} vocabulary must start with {IDLE}")));
            }
            for symbol in list.into_iter().skip(1) {
                if vocabulary.code(dim, &symbol).is_some() {
                    return Err(Error::Config(format!("duplicate {dim} symbol {symbol:?}")));
                }
                vocabulary.intern(dim, &symbol)?;
            }
        }
        Ok(vocabulary)
    }

    pub fn len(&self, dimension: Dimension) -> usize {
        self.symbols[dimension.index()].len()
    }

    pub fn symbols(&self, dimension: Dimension) -> &[String] {
        &self.symbols[dimension.index()]
    }

    pub fn code(&self, dimension: Dimension, symbol: &str) -> Option<u16> {
        self.index[dimension.index()].get(symbol).copied()
    }

    pub fn name(&self, dimension: Dimension, code: u16) -> Option<&str> {
        self.symbols[dimension.index()]
            .get(usize::from(code))
            .map(String::as_str)
    }

    /// Returns the code of `symbol`, appending it when absent.
    pub fn intern(&mut self, dimension: Dimension, symbol: &str) -> Result<u16> {
        if let Some(code) = self.code(dimension, symbol) {
            return Ok(code);
        }
        let list = &mut self.symbols[dimension.index()];
        let code = u16::try_from(list.len()).map_err(|_| Error::Config(format!("{dimension} vocabulary overflow")))?;
        list.push(symbol.to_string());
        self.index[dimension.index()].insert(symbol.to_string(), code);
        Ok(code)
    }

    pub fn activity(&self, verb: &str, instrument: &str, target: &str) -> Option<Activity> {
        Some(Activity::new(
            self.code(Dimension::Verb, verb)?,
            self.code(Dimension::Instrument, instrument)?,
            self.code(Dimension::Target, target)?,
        ))
    }

    pub fn intern_activity(&mut self, verb: &str, instrument: &str, target: &str) -> Result<Activity> {
        Ok(Activity::new(
            self.intern(Dimension::Verb, verb)?,
            self.intern(Dimension::Instrument, instrument)?,
            self.intern(Dimension::Target, target)?,
        ))
    }

    /// Symbol names of an activity, in dimension order.
    pub fn names(&self, activity: Activity) -> Result<[&str; DIMENSIONS]> {
        self.check(activity)?;
        Ok(std::array::from_fn(|i| {
            self.symbols[i][usize::from(activity.codes()[i])].as_str()
        }))
    }

    pub fn contains(&self, activity: Activity) -> bool {
        activity
            .codes()
            .iter()
            .zip(&self.symbols)
            .all(|(&code, list)| usize::from(code) < list.len())
    }

    pub fn check(&self, activity: Activity) -> Result<()> {
        if self.contains(activity) {
            Ok(())
        } else {
            Err(Error::VocabularyMismatch(format!(
                "activity {:?} has codes outside the vocabulary",
                activity.codes()
            )))
        }
    }

    /// Hex SHA-256 of the canonical JSON form; stored alongside trained models.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("vocabulary serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Hidden state of the deviation classifier.
///
/// The declaration order is the total order used for tie-breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationState {
    NoDeviation,
    ContextDeviation,
    EventDeviation,
}

impl DeviationState {
    pub const COUNT: usize = 3;

    pub const ALL: [DeviationState; Self::COUNT] = [
        DeviationState::NoDeviation,
        DeviationState::ContextDeviation,
        DeviationState::EventDeviation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Short label used in reports: ND, CD or ED.
    pub fn abbreviation(self) -> &'static str {
        match self {
            DeviationState::NoDeviation => "ND",
            DeviationState::ContextDeviation => "CD",
            DeviationState::EventDeviation => "ED",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DeviationState::NoDeviation => "no_deviation",
            DeviationState::ContextDeviation => "context_deviation",
            DeviationState::EventDeviation => "event_deviation",
        }
    }
}

impl fmt::Display for DeviationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_example() -> (Vocabulary, Activity, Activity, Activity) {
        let mut vocab = Vocabulary::new();
        let a1 = vocab.intern_activity("verb_1", "instrument_1", "target_1").unwrap();
        let a2 = vocab.intern_activity("verb_1", "instrument_2", "target_1").unwrap();
        let a3 = vocab.intern_activity("verb_3", "instrument_3", "target_3").unwrap();
        (vocab, a1, a2, a3)
    }

    #[test]
    fn component_distance_cases() {
        let v1 = Symbol::new(Dimension::Verb, 1);
        let v3 = Symbol::new(Dimension::Verb, 3);
        assert_eq!(component_distance(v1, v1).unwrap(), 0);
        assert_eq!(component_distance(v1, v3).unwrap(), 1);
        assert_eq!(component_distance(Symbol::idle(Dimension::Verb), v1).unwrap(), 1);
        let err = component_distance(v1, Symbol::new(Dimension::Target, 1)).unwrap_err();
        assert!(matches!(err, Error::VocabularyMismatch(_)));
    }

    #[test]
    fn activity_distance_worked_example() {
        let (vocab, a1, a2, a3) = worked_example();
        assert_eq!(activity_distance(&vocab, a1, a2).unwrap(), 1);
        assert_eq!(activity_distance(&vocab, a1, a3).unwrap(), 3);
        assert_eq!(activity_distance(&vocab, a1, a1).unwrap(), 0);
        assert_eq!(a1.distance(a3), 3);
    }

    #[test]
    fn activity_distance_rejects_foreign_codes() {
        let (vocab, a1, ..) = worked_example();
        let foreign = Activity::new(40, 0, 0);
        assert!(activity_distance(&vocab, a1, foreign).is_err());
    }

    #[test]
    fn activity_distance_is_a_metric_over_small_vocabulary() {
        let all: Vec<Activity> = (0..3u16)
            .flat_map(|v| (0..3u16).flat_map(move |i| (0..3u16).map(move |t| Activity::new(v, i, t))))
            .collect();
        for &a in &all {
            for &b in &all {
                let ab = a.distance(b);
                assert!(ab <= 3);
                assert_eq!(ab, b.distance(a));
                assert_eq!(ab == 0, a == b);
                for &c in &all {
                    assert!(a.distance(c) <= ab + b.distance(c));
                }
            }
        }
    }

    #[test]
    fn idle_is_code_zero_and_only_equals_itself() {
        let (vocab, a1, ..) = worked_example();
        for dim in Dimension::ALL {
            assert_eq!(vocab.code(dim, IDLE), Some(0));
        }
        assert!(Activity::IDLE.is_idle());
        assert_ne!(Activity::IDLE, a1);
        assert_eq!(Activity::IDLE.distance(Activity::IDLE), 0);
    }

    #[test]
    fn vocabulary_json_round_trip() {
        let (vocab, ..) = worked_example();
        let json = serde_json::to_string(&vocab).unwrap();
        assert!(json.starts_with(r#"{"verb":["IDLE","verb_1","verb_3"]"#));
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vocab);
        assert_eq!(back.fingerprint(), vocab.fingerprint());
    }

    #[test]
    fn vocabulary_requires_leading_idle() {
        let bad = r#"{"verb":["cut"],"instrument":["IDLE"],"target":["IDLE"]}"#;
        assert!(serde_json::from_str::<Vocabulary>(bad).is_err());
    }

    #[test]
    fn deviation_state_order() {
        use DeviationState::*;
        assert!(NoDeviation < ContextDeviation && ContextDeviation < EventDeviation);
        assert_eq!(DeviationState::from_index(2), Some(EventDeviation));
        assert_eq!(DeviationState::from_index(3), None);
    }
}
