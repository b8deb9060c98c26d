//! Multi-dimensional non-linear temporal scaling.
//!
//! A cohort of label sequences is brought to a common length in three steps:
//!
//! 1. [`dba`] computes a symbolic average sequence by DTW barycenter
//!    averaging, with the multi-dimensional activity distance as the DTW
//!    cost and a per-dimension mode as the barycenter update.
//! 2. [`compute_widths`] aligns the average to every sequence and records,
//!    per average element, the widest block of source elements matched to it.
//! 3. [`unpack`] stretches every sequence so each block fills its width,
//!    repeating the block's last element; nothing is dropped.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SampledSequence;
use crate::model::{Activity, DIMENSIONS};

const DIAG: u8 = 0;
const UP: u8 = 1;
const LEFT: u8 = 2;

/// Monotone alignment between a sequence `Q` (first index) and `C`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarpPath(Vec<(usize, usize)>);

impl WarpPath {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks boundary, step and monotonicity conditions against lengths.
    pub fn is_admissible(&self, q_len: usize, c_len: usize) -> bool {
        let Some(&first) = self.0.first() else {
            return false;
        };
        let last = *self.0.last().unwrap();
        first == (0, 0)
            && last == (q_len - 1, c_len - 1)
            && self.0.len() < q_len + c_len
            && self.0.windows(2).all(|w| {
                let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
                matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
            })
    }

    /// For every index of `Q`, the range of `C` indices paired with it.
    pub fn blocks(&self, q_len: usize) -> Vec<Range<usize>> {
        let mut blocks = vec![
            Range {
                start: usize::MAX,
                end: 0
            };
            q_len
        ];
        for &(i, j) in &self.0 {
            let block = &mut blocks[i];
            block.start = block.start.min(j);
            block.end = block.end.max(j + 1);
        }
        blocks
    }
}

fn check_non_empty(q: &[Activity], c: &[Activity]) -> Result<()> {
    if q.is_empty() || c.is_empty() {
        Err(Error::Empty("dtw requires non-empty sequences"))
    } else {
        Ok(())
    }
}

/// Classic three-step DTW with the multi-dimensional activity distance.
///
/// Among equal-cost predecessors the backtrace prefers the diagonal step,
/// then the step advancing only in `q`, then the one advancing only in `c`.
pub fn dtw(q: &[Activity], c: &[Activity]) -> Result<(u64, WarpPath)> {
    check_non_empty(q, c)?;
    let (n, m) = (q.len(), c.len());
    let mut steps = vec![DIAG; n * m];
    let mut prev = vec![0u64; m];
    let mut curr = vec![0u64; m];

    let mut acc = 0u64;
    for j in 0..m {
        acc += u64::from(q[0].distance(c[j]));
        prev[j] = acc;
        steps[j] = LEFT;
    }
    for i in 1..n {
        let qi = q[i];
        let row = &mut steps[i * m..(i + 1) * m];
        curr[0] = prev[0] + u64::from(qi.distance(c[0]));
        row[0] = UP;
        for j in 1..m {
            let (diag, up, left) = (prev[j - 1], prev[j], curr[j - 1]);
            let (best, step) = if diag <= up && diag <= left {
                (diag, DIAG)
            } else if up <= left {
                (up, UP)
            } else {
                (left, LEFT)
            };
            curr[j] = best + u64::from(qi.distance(c[j]));
            row[j] = step;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    let cost = prev[m - 1];

    let mut path = Vec::with_capacity(n + m - 1);
    let (mut i, mut j) = (n - 1, m - 1);
    path.push((i, j));
    while i > 0 || j > 0 {
        match steps[i * m + j] {
            DIAG => {
                i -= 1;
                j -= 1;
            }
            UP => i -= 1,
            _ => j -= 1,
        }
        path.push((i, j));
    }
    path.reverse();
    Ok((cost, WarpPath(path)))
}

/// DTW cost only, in linear memory.
pub fn dtw_cost(q: &[Activity], c: &[Activity]) -> Result<u64> {
    check_non_empty(q, c)?;
    let m = c.len();
    let mut prev = vec![0u64; m];
    let mut curr = vec![0u64; m];
    let mut acc = 0u64;
    for j in 0..m {
        acc += u64::from(q[0].distance(c[j]));
        prev[j] = acc;
    }
    for &qi in &q[1..] {
        curr[0] = prev[0] + u64::from(qi.distance(c[0]));
        for j in 1..m {
            curr[j] = prev[j - 1].min(prev[j]).min(curr[j - 1]) + u64::from(qi.distance(c[j]));
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m - 1])
}

/// Symmetric matrix of pairwise DTW costs, used to pick medoids.
#[derive(Debug, Clone)]
pub struct PairwiseCosts {
    n: usize,
    costs: Vec<u64>,
}

impl PairwiseCosts {
    pub fn compute(sequences: &[&[Activity]]) -> Result<Self> {
        let n = sequences.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let values = pairs
            .par_iter()
            .map(|&(i, j)| dtw_cost(sequences[i], sequences[j]))
            .collect::<Result<Vec<_>>>()?;
        let mut costs = vec![0; n * n];
        for (&(i, j), v) in pairs.iter().zip(values) {
            costs[i * n + j] = v;
            costs[j * n + i] = v;
        }
        Ok(Self { n, costs })
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.costs[i * self.n + j]
    }

    /// Member of `subset` with the least total cost to the rest of it;
    /// the earliest listed wins ties.
    pub fn medoid_of(&self, subset: &[usize]) -> Option<usize> {
        subset
            .iter()
            .map(|&i| (subset.iter().map(|&j| self.get(i, j)).sum::<u64>(), i))
            .min_by_key(|&(total, _)| total)
            .map(|(_, i)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbaConfig {
    pub max_iter: usize,
    pub patience: usize,
}

impl Default for DbaConfig {
    fn default() -> Self {
        Self {
            max_iter: 30,
            patience: 3,
        }
    }
}

/// Average sequence together with the elements associated to each of its
/// positions as `(sequence index, element index)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AverageSequence {
    pub labels: Vec<Activity>,
    pub associations: Vec<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone)]
pub struct DbaOutcome {
    pub average: AverageSequence,
    /// Total DTW cost of the returned average.
    pub cost: u64,
    /// Total DTW cost of the average at the start of each iteration.
    pub trace: Vec<u64>,
}

impl DbaOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

fn associations(len: usize, paths: &[WarpPath]) -> Vec<Vec<(usize, usize)>> {
    let mut sets = vec![Vec::new(); len];
    for (s, path) in paths.iter().enumerate() {
        for &(l, j) in path.pairs() {
            sets[l].push((s, j));
        }
    }
    sets
}

/// Per-dimension mode of the associated symbols; lowest code wins ties.
fn barycenter(current: &[Activity], sets: &[Vec<(usize, usize)>], sequences: &[&[Activity]]) -> Vec<Activity> {
    let mut counts: [Vec<u32>; DIMENSIONS] = Default::default();
    current
        .iter()
        .zip(sets)
        .map(|(&old, set)| {
            if set.is_empty() {
                return old;
            }
            for c in &mut counts {
                c.clear();
            }
            for &(s, j) in set {
                for (dim, code) in sequences[s][j].codes().into_iter().enumerate() {
                    let code = usize::from(code);
                    if counts[dim].len() <= code {
                        counts[dim].resize(code + 1, 0);
                    }
                    counts[dim][code] += 1;
                }
            }
            Activity::from_codes(std::array::from_fn(|dim| {
                let mut best = 0;
                for (code, &n) in counts[dim].iter().enumerate() {
                    if n > counts[dim][best] {
                        best = code;
                    }
                }
                best as u16
            }))
        })
        .collect()
}

/// DTW barycenter averaging over symbolic sequences.
///
/// Iterates until the total cost fails to improve `patience` times in a row,
/// the average stops changing, or `max_iter` iterations have run, and returns
/// the cheapest average seen.
pub fn dba(sequences: &[&[Activity]], init: Vec<Activity>, config: DbaConfig) -> Result<DbaOutcome> {
    if sequences.is_empty() {
        return Err(Error::Empty("dba requires at least one sequence"));
    }
    if init.is_empty() {
        return Err(Error::Empty("dba requires a non-empty initial average"));
    }
    if config.max_iter == 0 {
        return Err(Error::Config("dba max_iter must be at least 1".into()));
    }
    let mut current = init;
    let mut trace = Vec::new();
    let mut best: Option<(Vec<Activity>, Vec<WarpPath>, u64)> = None;
    let mut stale = 0;
    for _ in 0..config.max_iter {
        let aligned = sequences
            .par_iter()
            .map(|s| dtw(&current, s))
            .collect::<Result<Vec<_>>>()?;
        let cost: u64 = aligned.iter().map(|(c, _)| c).sum();
        let paths: Vec<WarpPath> = aligned.into_iter().map(|(_, p)| p).collect();
        trace.push(cost);
        let sets = associations(current.len(), &paths);
        let next = barycenter(&current, &sets, sequences);
        if best.as_ref().is_none_or(|b| cost < b.2) {
            best = Some((current.clone(), paths, cost));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
        if next == current {
            break;
        }
        current = next;
    }
    let (labels, paths, cost) = best.expect("at least one iteration ran");
    let associations = associations(labels.len(), &paths);
    Ok(DbaOutcome {
        average: AverageSequence { labels, associations },
        cost,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widths(Vec<usize>);

impl Widths {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.is_empty() || widths.contains(&0) {
            return Err(Error::Config("widths must be non-empty and positive".into()));
        }
        Ok(Self(widths))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Length of every unpacked sequence.
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

/// Widths plus, per sequence, the block of source indices matched to each
/// average element.
#[derive(Debug, Clone)]
pub struct WidthAlignment {
    pub widths: Widths,
    pub blocks: Vec<Vec<Range<usize>>>,
}

pub fn widths_from_blocks(blocks: Vec<Vec<Range<usize>>>) -> Result<WidthAlignment> {
    let len = blocks.first().map_or(0, Vec::len);
    if blocks.iter().any(|b| b.len() != len) {
        return Err(Error::Config("blocks disagree on the average length".into()));
    }
    let widths = (0..len)
        .map(|l| blocks.iter().map(|b| b[l].len()).max().unwrap_or(0))
        .collect();
    Ok(WidthAlignment {
        widths: Widths::new(widths)?,
        blocks,
    })
}

/// Aligns `average` to each sequence independently and takes, for every
/// average element, the largest number of elements any one sequence maps
/// onto it.
pub fn compute_widths(average: &[Activity], sequences: &[&[Activity]]) -> Result<WidthAlignment> {
    let blocks = sequences
        .par_iter()
        .map(|s| dtw(average, s).map(|(_, path)| path.blocks(average.len())))
        .collect::<Result<Vec<_>>>()?;
    widths_from_blocks(blocks)
}

/// Source index of every unpacked slot for one sequence: each block is
/// emitted in order and its last element repeated up to the block's width.
pub fn unpack_indices(blocks: &[Range<usize>], widths: &Widths) -> Result<Vec<usize>> {
    if blocks.len() != widths.len() {
        return Err(Error::LengthMismatch {
            expected: widths.len(),
            actual: blocks.len(),
        });
    }
    let mut out = Vec::with_capacity(widths.total());
    for (block, &width) in blocks.iter().zip(widths.as_slice()) {
        if block.is_empty() || block.len() > width {
            return Err(Error::Config(format!("block {block:?} does not fit width {width}")));
        }
        out.extend(block.clone());
        out.extend(std::iter::repeat_n(block.end - 1, width - block.len()));
    }
    Ok(out)
}

/// A sequence stretched onto the cohort's common time axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSequence {
    pub procedure_id: String,
    pub labels: Vec<Activity>,
    /// Event flag carried through the same mapping as the labels.
    pub event_mask: Vec<bool>,
    /// Index into the sampled sequence of each aligned slot.
    pub source_index: Vec<usize>,
}

impl AlignedSequence {
    pub fn from_indices(sequence: &SampledSequence, source_index: Vec<usize>) -> Self {
        Self {
            procedure_id: sequence.procedure_id.clone(),
            labels: source_index.iter().map(|&i| sequence.labels[i]).collect(),
            event_mask: source_index.iter().map(|&i| sequence.event_mask[i]).collect(),
            source_index,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn unpack(sequences: &[SampledSequence], alignment: &WidthAlignment) -> Result<Vec<AlignedSequence>> {
    if sequences.len() != alignment.blocks.len() {
        return Err(Error::LengthMismatch {
            expected: alignment.blocks.len(),
            actual: sequences.len(),
        });
    }
    sequences
        .iter()
        .zip(&alignment.blocks)
        .map(|(seq, blocks)| {
            if blocks.last().is_some_and(|b| b.end > seq.len()) {
                return Err(Error::Config(format!(
                    "blocks of {} reach past its end",
                    seq.procedure_id
                )));
            }
            Ok(AlignedSequence::from_indices(
                seq,
                unpack_indices(blocks, &alignment.widths)?,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignConfig {
    pub dba: DbaConfig,
}

#[derive(Debug, Clone)]
pub struct AlignedCohort {
    pub average: AverageSequence,
    pub dba_trace: Vec<u64>,
    pub widths: Widths,
    pub aligned: Vec<AlignedSequence>,
}

/// Full multi-dimensional alignment of a cohort. `pairwise`, when given,
/// must index the same sequences and is only used to choose the medoid.
pub fn align_cohort(
    sequences: &[SampledSequence],
    config: &AlignConfig,
    pairwise: Option<(&PairwiseCosts, &[usize])>,
) -> Result<AlignedCohort> {
    if sequences.is_empty() {
        return Err(Error::Empty("cohort has no sequences"));
    }
    let labels: Vec<&[Activity]> = sequences.iter().map(|s| s.labels.as_slice()).collect();
    let medoid = match pairwise {
        Some((costs, ids)) => {
            let pick = costs.medoid_of(ids).expect("non-empty cohort");
            ids.iter().position(|&i| i == pick).expect("medoid in subset")
        }
        None => {
            let costs = PairwiseCosts::compute(&labels)?;
            let all: Vec<usize> = (0..labels.len()).collect();
            costs.medoid_of(&all).expect("non-empty cohort")
        }
    };
    let outcome = dba(&labels, labels[medoid].to_vec(), config.dba)?;
    let alignment = compute_widths(&outcome.average.labels, &labels)?;
    let aligned = unpack(sequences, &alignment)?;
    Ok(AlignedCohort {
        average: outcome.average,
        dba_trace: outcome.trace,
        widths: alignment.widths,
        aligned,
    })
}
