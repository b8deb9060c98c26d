//! Annotation parsing and discretisation.
//!
//! A procedure is annotated as two CSV streams: activity intervals
//! (`start_s,end_s,verb,instrument,target`) and adverse-event intervals
//! (`start_s,end_s,kind`). Both are validated into a [`ContinuousSpm`] which
//! [`sample`] turns into a fixed-rate label sequence.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{Activity, Dimension, Vocabulary};

/// Samples per second as an exact decimal fraction `num / den`.
///
/// Sample `k` sits at `k * den / num` seconds, computed with a single
/// rounding so the grid never drifts (12.5 Hz maps `k` to `k * 2/25` s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleRate {
    num: u64,
    den: u64,
}

impl SampleRate {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::Config("sampling rate must be positive".into()));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn hz(hz: u64) -> Result<Self> {
        Self::new(hz, 1)
    }

    /// The rates swept by the evaluation: 2..=12 Hz plus half of 25 Hz video.
    pub fn sweep() -> Vec<SampleRate> {
        let mut rates: Vec<_> = (2..=12).map(|hz| SampleRate { num: hz, den: 1 }).collect();
        rates.push(SampleRate { num: 25, den: 2 });
        rates
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn numerator(self) -> u64 {
        self.num
    }

    pub fn denominator(self) -> u64 {
        self.den
    }

    /// Time in seconds of sample index `k`.
    #[inline]
    pub fn time_of(self, k: usize) -> f64 {
        (k as u64 * self.den) as f64 / self.num as f64
    }

    pub fn period(self) -> f64 {
        self.den as f64 / self.num as f64
    }

    /// Largest `k` with `time_of(k) <= t`, for `t >= 0`.
    pub fn last_index_at_or_before(self, t: f64) -> usize {
        let mut k = (t * self.num as f64 / self.den as f64).floor().max(0.0) as usize;
        while k > 0 && self.time_of(k) > t {
            k -= 1;
        }
        while self.time_of(k + 1) <= t {
            k += 1;
        }
        k
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl FromStr for SampleRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("invalid sampling rate {s:?}"));
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() || frac.len() > 9 {
            return Err(bad());
        }
        let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int) || !all_digits(frac) {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let frac: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        let num = int.checked_mul(den).and_then(|v| v.checked_add(frac)).ok_or_else(bad)?;
        SampleRate::new(num, den)
    }
}

impl fmt::Display for SampleRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

impl Serialize for SampleRate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for SampleRate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let hz = f64::deserialize(deserializer)?;
        hz.to_string().parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub activity: Activity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub kind: String,
}

/// One procedure as a timeline of activity intervals plus adverse events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSpm {
    pub procedure_id: String,
    activities: Vec<ActivityInterval>,
    events: Vec<EventInterval>,
}

impl ContinuousSpm {
    /// Validates and normalises (sorts) the intervals.
    pub fn new(
        procedure_id: impl Into<String>,
        mut activities: Vec<ActivityInterval>,
        mut events: Vec<EventInterval>,
    ) -> Result<Self> {
        let procedure_id = procedure_id.into();
        if activities.is_empty() {
            return Err(Error::Empty("procedure has no activities"));
        }
        activities.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        check_intervals(activities.iter().map(|a| (a.start_s, a.end_s)), "activity")?;
        events.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        check_intervals(events.iter().map(|e| (e.start_s, e.end_s)), "event")?;
        let end = activities.last().map_or(0.0, |a| a.end_s);
        if let Some(e) = events.iter().find(|e| e.end_s > end) {
            return Err(Error::InvalidTimeline(format!(
                "event [{}, {}) extends past the timeline end {end}",
                e.start_s, e.end_s
            )));
        }
        Ok(Self {
            procedure_id,
            activities,
            events,
        })
    }

    pub fn activities(&self) -> &[ActivityInterval] {
        &self.activities
    }

    pub fn events(&self) -> &[EventInterval] {
        &self.events
    }

    /// End of the last activity; the timeline starts at 0.
    pub fn duration(&self) -> f64 {
        self.activities.last().map_or(0.0, |a| a.end_s)
    }
}

fn check_intervals(intervals: impl Iterator<Item = (f64, f64)>, what: &str) -> Result<()> {
    let mut previous_end = 0.0f64;
    for (i, (start, end)) in intervals.enumerate() {
        if !(start.is_finite() && end.is_finite()) || start < 0.0 {
            return Err(Error::InvalidTimeline(format!(
                "{what} interval [{start}, {end}) is not within a non-negative timeline"
            )));
        }
        if end <= start {
            return Err(Error::InvalidTimeline(format!(
                "{what} interval [{start}, {end}) ends before it starts"
            )));
        }
        if i > 0 && start < previous_end {
            return Err(Error::InvalidTimeline(format!(
                "{what} interval [{start}, {end}) overlaps the previous one"
            )));
        }
        previous_end = end;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ActivityRow {
    start_s: String,
    end_s: String,
    verb: String,
    instrument: String,
    target: String,
}

#[derive(Debug, Deserialize)]
struct EventRow {
    start_s: String,
    end_s: String,
    #[serde(default)]
    kind: String,
}

fn parse_seconds(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("invalid seconds value {field:?}"),
        })
}

/// Orders `(line, start, end)` rows and reports the first bad one by the
/// record number it had in the file (1-based, header excluded).
fn sort_and_check(rows: &mut [(usize, f64, f64)]) -> Result<()> {
    for &(line, start, end) in rows.iter() {
        if start < 0.0 {
            return Err(Error::Parse {
                line,
                message: "interval starts before 0".into(),
            });
        }
        if end <= start {
            return Err(Error::Parse {
                line,
                message: format!("end {end} is not after start {start}"),
            });
        }
    }
    rows.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    for pair in rows.windows(2) {
        let (prev, next) = (pair[0], pair[1]);
        if next.1 < prev.2 {
            return Err(Error::Parse {
                line: prev.0.max(next.0),
                message: format!("interval [{}, {}) overlaps [{}, {})", next.1, next.2, prev.1, prev.2),
            });
        }
    }
    Ok(())
}

/// Parses an activity CSV. Unknown symbols are added to `vocabulary` when
/// `grow` is set and rejected otherwise.
pub fn parse_activities<R: Read>(reader: R, vocabulary: &mut Vocabulary, grow: bool) -> Result<Vec<ActivityInterval>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in csv.deserialize::<ActivityRow>().enumerate() {
        let line = i + 1;
        let row = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let start = parse_seconds(&row.start_s, line)?;
        let end = parse_seconds(&row.end_s, line)?;
        let mut codes = [0u16; 3];
        for (dim, name) in Dimension::ALL
            .into_iter()
            .zip([&row.verb, &row.instrument, &row.target])
        {
            codes[dim.index()] = match vocabulary.code(dim, name) {
                Some(code) => code,
                None if grow => vocabulary.intern(dim, name)?,
                None => {
                    return Err(Error::UnknownSymbol {
                        dimension: dim,
                        symbol: name.clone(),
                        line,
                    })
                }
            };
        }
        rows.push((line, start, end));
        labels.push(Activity::from_codes(codes));
    }
    sort_and_check(&mut rows)?;
    Ok(rows
        .into_iter()
        .map(|(line, start_s, end_s)| ActivityInterval {
            start_s,
            end_s,
            activity: labels[line - 1],
        })
        .collect())
}

pub fn parse_events<R: Read>(reader: R) -> Result<Vec<EventInterval>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    let mut kinds = Vec::new();
    for (i, record) in csv.deserialize::<EventRow>().enumerate() {
        let line = i + 1;
        let row = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        rows.push((
            line,
            parse_seconds(&row.start_s, line)?,
            parse_seconds(&row.end_s, line)?,
        ));
        kinds.push(row.kind);
    }
    sort_and_check(&mut rows)?;
    Ok(rows
        .into_iter()
        .map(|(line, start_s, end_s)| EventInterval {
            start_s,
            end_s,
            kind: kinds[line - 1].clone(),
        })
        .collect())
}

/// Reads one procedure from its activity stream and optional event stream.
pub fn parse_annotations<A: Read, E: Read>(
    procedure_id: &str,
    activities: A,
    events: Option<E>,
    vocabulary: &mut Vocabulary,
    grow: bool,
) -> Result<ContinuousSpm> {
    let activities = parse_activities(activities, vocabulary, grow)?;
    let events = match events {
        Some(reader) => parse_events(reader)?,
        None => Vec::new(),
    };
    ContinuousSpm::new(procedure_id, activities, events)
}

pub fn write_activities<W: std::io::Write>(writer: W, spm: &ContinuousSpm, vocabulary: &Vocabulary) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["start_s", "end_s", "verb", "instrument", "target"])?;
    for interval in spm.activities() {
        let [verb, instrument, target] = vocabulary.names(interval.activity)?;
        csv.write_record([
            interval.start_s.to_string().as_str(),
            interval.end_s.to_string().as_str(),
            verb,
            instrument,
            target,
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_events<W: std::io::Write>(writer: W, spm: &ContinuousSpm) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["start_s", "end_s", "kind"])?;
    for event in spm.events() {
        csv.write_record([
            event.start_s.to_string().as_str(),
            event.end_s.to_string().as_str(),
            event.kind.as_str(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// A procedure discretised on a fixed sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSequence {
    pub procedure_id: String,
    pub rate: SampleRate,
    pub labels: Vec<Activity>,
    pub event_mask: Vec<bool>,
}

impl SampledSequence {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rebuilds a timeline whose sampling at `self.rate` gives back this
    /// sequence. Runs map to `[k0·Δ, k1·Δ)`; a run touching the last sample
    /// ends half a period after it.
    ///
    /// This is only an inverse of [`sample`] when the sequence has the shape
    /// sampling produces: at most one trailing IDLE sample, and no event on a
    /// trailing IDLE sample.
    pub fn unsample(&self) -> Result<ContinuousSpm> {
        let n = self.labels.len();
        if n == 0 {
            return Err(Error::Empty("sequence has no samples"));
        }
        if self.event_mask.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: self.event_mask.len(),
            });
        }
        let rate = self.rate;
        let tail = rate.time_of(n - 1) + rate.period() / 2.0;
        let end_of = |k: usize| if k == n { tail } else { rate.time_of(k) };
        let mut activities = Vec::new();
        for (start, end) in runs(&self.labels) {
            let activity = self.labels[start];
            if !activity.is_idle() {
                activities.push(ActivityInterval {
                    start_s: rate.time_of(start),
                    end_s: end_of(end),
                    activity,
                });
            }
        }
        let events = runs(&self.event_mask)
            .filter(|&(start, _)| self.event_mask[start])
            .map(|(start, end)| EventInterval {
                start_s: rate.time_of(start),
                end_s: end_of(end),
                kind: "event".into(),
            })
            .collect();
        ContinuousSpm::new(self.procedure_id.clone(), activities, events)
    }
}

/// Half-open `[start, end)` index ranges of maximal runs of equal values.
pub fn runs<T: PartialEq>(values: &[T]) -> impl Iterator<Item = (usize, usize)> + '_ {
    let mut start = 0;
    std::iter::from_fn(move || {
        if start >= values.len() {
            return None;
        }
        let mut end = start + 1;
        while end < values.len() && values[end] == values[start] {
            end += 1;
        }
        let run = (start, end);
        start = end;
        Some(run)
    })
}

/// Labels the grid `0, Δ, 2Δ, …` up to the last activity end inclusive.
///
/// Sample `k` takes the activity whose `[start, end)` contains `k·Δ` and
/// IDLE otherwise; its event flag is set when any event interval contains
/// `k·Δ`.
pub fn sample(spm: &ContinuousSpm, rate: SampleRate) -> Result<SampledSequence> {
    if spm.activities().is_empty() {
        return Err(Error::Empty("procedure has no activities"));
    }
    let n = rate.last_index_at_or_before(spm.duration()) + 1;
    let mut labels = Vec::with_capacity(n);
    let mut event_mask = Vec::with_capacity(n);
    let mut activities = spm.activities().iter().peekable();
    let mut events = spm.events().iter().peekable();
    for k in 0..n {
        let t = rate.time_of(k);
        while activities.next_if(|a| a.end_s <= t).is_some() {}
        while events.next_if(|e| e.end_s <= t).is_some() {}
        labels.push(match activities.peek() {
            Some(a) if a.start_s <= t => a.activity,
            _ => Activity::IDLE,
        });
        event_mask.push(matches!(events.peek(), Some(e) if e.start_s <= t));
    }
    Ok(SampledSequence {
        procedure_id: spm.procedure_id.clone(),
        rate,
        labels,
        event_mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab() -> Vocabulary {
        let mut v = Vocabulary::new();
        v.intern_activity("cut", "hook", "rectum").unwrap();
        v.intern_activity("coagulate", "hook", "rectum").unwrap();
        v
    }

    const WELL_FORMED: &str = "start_s,end_s,verb,instrument,target\n\
        0.0,2.0,cut,hook,rectum\n\
        2.0,5.0,coagulate,hook,rectum\n";

    #[test]
    fn parses_well_formed_file() {
        let mut v = vocab();
        let spm = parse_annotations("p1", WELL_FORMED.as_bytes(), None::<&[u8]>, &mut v, false).unwrap();
        assert_eq!(spm.activities().len(), 2);
        assert!(spm.events().is_empty());
        assert_eq!(
            spm.activities()[1].activity,
            v.activity("coagulate", "hook", "rectum").unwrap()
        );
        assert_eq!(spm.duration(), 5.0);
    }

    #[test]
    fn parser_sorts_rows() {
        let shuffled = "start_s,end_s,verb,instrument,target\n\
            2.0,5.0,coagulate,hook,rectum\n\
            0.0,2.0,cut,hook,rectum\n";
        let mut v = vocab();
        let a = parse_annotations("p1", WELL_FORMED.as_bytes(), None::<&[u8]>, &mut v, false).unwrap();
        let b = parse_annotations("p1", shuffled.as_bytes(), None::<&[u8]>, &mut v, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn overlap_reported_at_second_record() {
        let text = "start_s,end_s,verb,instrument,target\n\
            0,2,cut,hook,rectum\n\
            1.5,3,cut,hook,rectum\n";
        let err = parse_activities(text.as_bytes(), &mut vocab(), false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let reversed = "start_s,end_s,verb,instrument,target\n3,2,cut,hook,rectum\n";
        assert!(matches!(
            parse_activities(reversed.as_bytes(), &mut vocab(), false),
            Err(Error::Parse { line: 1, .. })
        ));
        let garbage = "start_s,end_s,verb,instrument,target\n0,abc,cut,hook,rectum\n";
        assert!(matches!(
            parse_activities(garbage.as_bytes(), &mut vocab(), false),
            Err(Error::Parse { line: 1, .. })
        ));
        let short = "start_s,end_s,verb,instrument,target\n0,1,cut\n";
        assert!(parse_activities(short.as_bytes(), &mut vocab(), false).is_err());
    }

    #[test]
    fn unknown_symbols_grow_or_fail() {
        let text = "start_s,end_s,verb,instrument,target\n0,1,dissect,scissors,sacrum\n";
        let mut v = vocab();
        assert!(matches!(
            parse_activities(text.as_bytes(), &mut v, false),
            Err(Error::UnknownSymbol {
                dimension: Dimension::Verb,
                line: 1,
                ..
            })
        ));
        let parsed = parse_activities(text.as_bytes(), &mut v, true).unwrap();
        assert_eq!(parsed[0].activity, v.activity("dissect", "scissors", "sacrum").unwrap());
    }

    #[test]
    fn events_must_fit_the_timeline() {
        let mut v = vocab();
        let events = "start_s,end_s,kind\n4.0,6.0,bleeding\n";
        let err = parse_annotations("p", WELL_FORMED.as_bytes(), Some(events.as_bytes()), &mut v, false).unwrap_err();
        assert!(matches!(err, Error::InvalidTimeline(_)));
    }

    fn spm(intervals: &[(f64, f64, Activity)], events: &[(f64, f64)]) -> ContinuousSpm {
        ContinuousSpm::new(
            "p",
            intervals
                .iter()
                .map(|&(s, e, a)| ActivityInterval {
                    start_s: s,
                    end_s: e,
                    activity: a,
                })
                .collect(),
            events
                .iter()
                .map(|&(s, e)| EventInterval {
                    start_s: s,
                    end_s: e,
                    kind: "bleeding".into(),
                })
                .collect(),
        )
        .unwrap()
    }

    const A: Activity = Activity::new(1, 1, 1);
    const B: Activity = Activity::new(2, 1, 1);

    #[test]
    fn sampling_uses_half_open_intervals() {
        let s = sample(&spm(&[(0.0, 1.0, A)], &[]), SampleRate::hz(2).unwrap()).unwrap();
        assert_eq!(s.labels, vec![A, A, Activity::IDLE]);
        assert_eq!(s.event_mask, vec![false; 3]);
    }

    #[test]
    fn gaps_become_idle() {
        let s = sample(&spm(&[(0.0, 2.0, A), (3.0, 4.0, B)], &[]), SampleRate::hz(2).unwrap()).unwrap();
        assert_eq!(s.labels[4], Activity::IDLE);
        assert_eq!(s.labels[5], Activity::IDLE);
        assert_eq!(s.labels[6], B);
        assert_eq!(s.len(), 9);
    }

    #[test]
    fn event_mask_matches_enumerated_sample_times() {
        // Times 0, 0.5, 1.0, 1.5, 2.0: only 1.0 lies in [1.0, 1.4).
        let s = sample(&spm(&[(0.0, 2.0, A)], &[(1.0, 1.4)]), SampleRate::hz(2).unwrap()).unwrap();
        assert_eq!(s.event_mask, vec![false, false, true, false, false]);
    }

    #[test]
    fn rate_parsing_is_exact() {
        let r: SampleRate = "12.5".parse().unwrap();
        assert_eq!((r.numerator(), r.denominator()), (25, 2));
        assert_eq!(r.time_of(25), 2.0);
        assert_eq!(r.time_of(1), 0.08);
        assert_eq!("8".parse::<SampleRate>().unwrap(), SampleRate::hz(8).unwrap());
        assert!("0".parse::<SampleRate>().is_err());
        assert!("-2".parse::<SampleRate>().is_err());
        assert!("abc".parse::<SampleRate>().is_err());
        assert_eq!(SampleRate::sweep().len(), 12);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, "12.5");
        assert_eq!(serde_json::from_str::<SampleRate>(&json).unwrap(), r);
    }

    #[test]
    fn sample_count_at_12_5_hz() {
        let s = sample(&spm(&[(0.0, 2.0, A)], &[]), "12.5".parse().unwrap()).unwrap();
        assert_eq!(s.len(), 26);
        assert_eq!(s.labels[24], A);
        assert_eq!(s.labels[25], Activity::IDLE);
    }

    fn grid_sequence() -> impl Strategy<Value = (SampledSequence, bool)> {
        (
            prop::collection::vec((0u16..3, any::<bool>()), 1..40),
            prop::bool::ANY,
            prop::sample::select(vec!["2", "5", "12.5"]),
        )
            .prop_map(|(cells, trailing_idle, rate)| {
                let mut labels: Vec<Activity> = cells.iter().map(|&(v, _)| Activity::new(v, 0, 0)).collect();
                let mut mask: Vec<bool> = cells.iter().map(|&(_, e)| e).collect();
                // Shape produced by sampling: last sample is non-IDLE or a lone IDLE.
                if trailing_idle {
                    let last = labels.len() - 1;
                    if labels[last].is_idle() {
                        labels[last] = Activity::new(1, 0, 0);
                    }
                    labels.push(Activity::IDLE);
                    mask.push(false);
                } else if labels.last().unwrap().is_idle() {
                    *labels.last_mut().unwrap() = Activity::new(2, 0, 0);
                }
                let seq = SampledSequence {
                    procedure_id: "p".into(),
                    rate: rate.parse().unwrap(),
                    labels,
                    event_mask: mask,
                };
                (seq, trailing_idle)
            })
    }

    proptest! {
        #[test]
        fn resampling_on_grid_is_lossless((seq, _) in grid_sequence()) {
            let spm = seq.unsample().unwrap();
            prop_assert_eq!(sample(&spm, seq.rate).unwrap(), seq);
        }

        #[test]
        fn higher_rates_keep_the_label_set(
            durations in prop::collection::vec((5u32..40, 0u32..3, 0u16..4), 1..12),
            low in 2u64..12,
            extra in 1u64..8,
        ) {
            // Every interval and gap lasts at least 0.5 s, so each contains a
            // grid point at 2 Hz or faster.
            let mut t = 0.0;
            let mut intervals = Vec::new();
            for &(tenths, gap, verb) in &durations {
                t += f64::from(gap * 5) / 10.0;
                let end = t + f64::from(tenths) / 10.0;
                intervals.push((t, end, Activity::new(verb + 1, 0, 0)));
                t = end;
            }
            let spm = spm(&intervals, &[]);
            // The sample taken exactly at the timeline end is IDLE under the
            // half-open rule and exists only when the end falls on the grid.
            let label_set = |hz| {
                let rate = SampleRate::hz(hz).unwrap();
                let s = sample(&spm, rate).unwrap();
                s.labels
                    .into_iter()
                    .enumerate()
                    .filter(|&(k, _)| rate.time_of(k) < spm.duration())
                    .map(|(_, a)| a)
                    .collect::<std::collections::BTreeSet<_>>()
            };
            prop_assert_eq!(label_set(low), label_set(low + extra));
        }

        #[test]
        fn event_flags_are_covered_by_events(
            events in prop::collection::vec((0u32..100, 1u32..30), 0..6),
            rate in prop::sample::select(vec!["2", "7", "12.5"]),
        ) {
            let mut t = 0.0;
            let mut ev = Vec::new();
            for &(gap, len) in &events {
                let start = t + f64::from(gap) / 37.0;
                let end = start + f64::from(len) / 13.0;
                if end > 20.0 { break; }
                ev.push((start, end));
                t = end;
            }
            let spm = spm(&[(0.0, 20.0, A)], &ev);
            let rate: SampleRate = rate.parse().unwrap();
            let s = sample(&spm, rate).unwrap();
            for (k, &flag) in s.event_mask.iter().enumerate() {
                let time = rate.time_of(k);
                let covered = ev.iter().any(|&(a, b)| a <= time && time < b);
                prop_assert_eq!(flag, covered);
            }
        }
    }
}
