//! Explicit-duration hidden semi-Markov model with discrete emissions.
//!
//! A sequence is generated segment by segment: the first segment's state is
//! drawn from `pi`, every segment of state `i` lasts `d` steps with
//! probability `p[i][d - 1]` (`1 <= d <= d_max`) and emits each of its
//! observations independently from `b[i]`, and the next segment's state is
//! drawn from `a[i]`, whose diagonal is pinned to zero. The last segment ends
//! exactly at the last observation.
//!
//! All recursions run in log space. Forward/backward cost
//! `O(T · N · (N + d_max))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_TOLERANCE: f64 = 1e-9;

/// `λ = (π, A, B, P)` over `n_states` hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct HsmmModel {
    pi: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
}

/// On-disk form with explicit shapes.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    n_states: usize,
    alphabet_size: usize,
    d_max: usize,
    pi: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
}

impl TryFrom<ModelFile> for HsmmModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let model = HsmmModel::new(f.pi, f.a, f.b, f.p)?;
        if (model.n_states(), model.alphabet_size(), model.d_max()) != (f.n_states, f.alphabet_size, f.d_max) {
            return Err(Error::Config("declared shapes do not match the matrices".into()));
        }
        Ok(model)
    }
}

impl From<HsmmModel> for ModelFile {
    fn from(m: HsmmModel) -> Self {
        ModelFile {
            n_states: m.n_states(),
            alphabet_size: m.alphabet_size(),
            d_max: m.d_max(),
            pi: m.pi,
            a: m.a,
            b: m.b,
            p: m.p,
        }
    }
}

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::Config(format!("{what} has entries outside [0, 1]")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(Error::Config(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl HsmmModel {
    /// Validates shapes, row-stochasticity and the zero diagonal of `a`.
    pub fn new(pi: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, p: Vec<Vec<f64>>) -> Result<Self> {
        let n = pi.len();
        if n < 2 {
            return Err(Error::Config("an HSMM needs at least two states".into()));
        }
        if a.len() != n || b.len() != n || p.len() != n {
            return Err(Error::Config("every matrix needs one row per state".into()));
        }
        let k = b[0].len();
        let d = p[0].len();
        if k == 0 || d == 0 {
            return Err(Error::Config("empty emission or duration rows".into()));
        }
        check_distribution(&pi, "pi")?;
        for i in 0..n {
            if a[i].len() != n || b[i].len() != k || p[i].len() != d {
                return Err(Error::Config(format!("ragged row {i}")));
            }
            if a[i][i] != 0.0 {
                return Err(Error::Config(format!("self-transition a[{i}][{i}] is not zero")));
            }
            check_distribution(&a[i], &format!("a[{i}]"))?;
            check_distribution(&b[i], &format!("b[{i}]"))?;
            check_distribution(&p[i], &format!("p[{i}]"))?;
        }
        Ok(Self { pi, a, b, p })
    }

    pub fn n_states(&self) -> usize {
        self.pi.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.b[0].len()
    }

    pub fn d_max(&self) -> usize {
        self.p[0].len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn a(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn b(&self) -> &[Vec<f64>] {
        &self.b
    }

    /// `p()[i][d - 1]` is the probability that a segment of state `i` lasts
    /// exactly `d` steps.
    pub fn p(&self) -> &[Vec<f64>] {
        &self.p
    }

    /// Smallest strictly positive parameter, ignoring the pinned diagonal.
    pub fn min_entry(&self) -> f64 {
        let off_diagonal = self
            .a
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().filter(move |&(j, _)| j != i).map(|(_, &x)| x));
        self.pi
            .iter()
            .copied()
            .chain(off_diagonal)
            .chain(self.b.iter().flatten().copied())
            .chain(self.p.iter().flatten().copied())
            .fold(f64::INFINITY, f64::min)
    }

    fn logs(&self) -> LogParams {
        let ln = |row: &Vec<f64>| row.iter().map(|x| x.ln()).collect::<Vec<_>>();
        LogParams {
            n: self.n_states(),
            d_max: self.d_max(),
            pi: self.pi.iter().map(|x| x.ln()).collect(),
            a: self.a.iter().map(ln).collect(),
            b: self.b.iter().map(ln).collect(),
            p: self.p.iter().map(ln).collect(),
        }
    }

    fn check_observations(&self, obs: &[u32]) -> Result<()> {
        if obs.is_empty() {
            return Err(Error::Empty("observation sequence is empty"));
        }
        let k = self.alphabet_size();
        match obs.iter().find(|&&o| o as usize >= k) {
            Some(o) => Err(Error::Config(format!(
                "observation code {o} outside an alphabet of {k}"
            ))),
            None => Ok(()),
        }
    }
}

struct LogParams {
    n: usize,
    d_max: usize,
    pi: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
}

/// Streaming log-sum-exp.
#[derive(Clone, Copy)]
struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    const EMPTY: LogSum = LogSum {
        max: f64::NEG_INFINITY,
        sum: 0.0,
    };

    #[inline]
    fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    fn value(self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

fn log_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = LogSum::EMPTY;
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Forward/backward tables for one observation sequence.
struct Lattice {
    t_len: usize,
    n: usize,
    /// `alpha[e * n + j]`: log P(o[..e], a segment of `j` ends at `e`), e in 1..=T.
    alpha: Vec<f64>,
    /// `enter[s * n + j]`: log P(o[..s], a segment of `j` starts at `s`).
    enter: Vec<f64>,
    /// `beta[e * n + i]`: log P(o[e..] | a segment of `i` ended at `e`).
    beta: Vec<f64>,
    /// `start[s * n + j]`: log P(o[s..] | a segment of `j` starts at `s`).
    start: Vec<f64>,
    log_likelihood: f64,
}

fn forward(lp: &LogParams, obs: &[u32]) -> (Vec<f64>, Vec<f64>, f64) {
    let (t_len, n) = (obs.len(), lp.n);
    let mut alpha = vec![f64::NEG_INFINITY; (t_len + 1) * n];
    let mut enter = vec![f64::NEG_INFINITY; (t_len + 1) * n];
    enter[..n].copy_from_slice(&lp.pi);
    for e in 1..=t_len {
        for j in 0..n {
            let mut acc = LogSum::EMPTY;
            let mut emis = 0.0;
            for d in 1..=lp.d_max.min(e) {
                let s = e - d;
                emis += lp.b[j][obs[s] as usize];
                if emis == f64::NEG_INFINITY {
                    break;
                }
                acc.add(enter[s * n + j] + lp.p[j][d - 1] + emis);
            }
            alpha[e * n + j] = acc.value();
        }
        if e < t_len {
            for j in 0..n {
                enter[e * n + j] = log_sum((0..n).filter(|&i| i != j).map(|i| alpha[e * n + i] + lp.a[i][j]));
            }
        }
    }
    let ll = log_sum((0..n).map(|j| alpha[t_len * n + j]));
    (alpha, enter, ll)
}

fn lattice(lp: &LogParams, obs: &[u32]) -> Lattice {
    let (alpha, enter, log_likelihood) = forward(lp, obs);
    let (t_len, n) = (obs.len(), lp.n);
    let mut beta = vec![f64::NEG_INFINITY; (t_len + 1) * n];
    let mut start = vec![f64::NEG_INFINITY; (t_len + 1) * n];
    beta[t_len * n..].fill(0.0);
    for s in (0..t_len).rev() {
        for j in 0..n {
            let mut acc = LogSum::EMPTY;
            let mut emis = 0.0;
            for d in 1..=lp.d_max.min(t_len - s) {
                emis += lp.b[j][obs[s + d - 1] as usize];
                if emis == f64::NEG_INFINITY {
                    break;
                }
                acc.add(lp.p[j][d - 1] + emis + beta[(s + d) * n + j]);
            }
            start[s * n + j] = acc.value();
        }
        if s > 0 {
            for i in 0..n {
                beta[s * n + i] = log_sum((0..n).filter(|&j| j != i).map(|j| lp.a[i][j] + start[s * n + j]));
            }
        }
    }
    Lattice {
        t_len,
        n,
        alpha,
        enter,
        beta,
        start,
        log_likelihood,
    }
}

impl Lattice {
    /// Posterior probability of being in each state at each step.
    fn occupancy(&self) -> Vec<f64> {
        let (t_len, n, ll) = (self.t_len, self.n, self.log_likelihood);
        let mut occ = vec![0.0; t_len * n];
        let mut running = vec![0.0; n];
        for t in 0..t_len {
            for j in 0..n {
                running[j] += (self.enter[t * n + j] + self.start[t * n + j] - ll).exp();
                if t > 0 {
                    running[j] -= (self.alpha[t * n + j] + self.beta[t * n + j] - ll).exp();
                }
                occ[t * n + j] = running[j].clamp(0.0, 1.0);
            }
        }
        occ
    }
}

/// Exact `log P(obs | model)`.
///
/// Observation codes must lie inside the model's alphabet; the reserved
/// unseen code is an ordinary column of `b`.
pub fn likelihood(model: &HsmmModel, obs: &[u32]) -> Result<f64> {
    model.check_observations(obs)?;
    Ok(forward(&model.logs(), obs).2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    /// Most probable segmentation (explicit-duration Viterbi).
    #[default]
    Viterbi,
    /// Most probable state at each step on its own.
    Posterior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub states: Vec<usize>,
    /// Joint log-probability of the Viterbi segmentation; the total
    /// log-likelihood for posterior decoding.
    pub score: f64,
}

pub fn decode(model: &HsmmModel, obs: &[u32], mode: DecodeMode) -> Result<Decoded> {
    model.check_observations(obs)?;
    let lp = model.logs();
    match mode {
        DecodeMode::Viterbi => Ok(viterbi(&lp, obs)),
        DecodeMode::Posterior => {
            let lat = lattice(&lp, obs);
            if !lat.log_likelihood.is_finite() {
                return Err(Error::Numerical("observation sequence has zero probability".into()));
            }
            let occ = lat.occupancy();
            let states = occ
                .chunks(lat.n)
                .map(|row| {
                    let mut best = 0;
                    for (j, &v) in row.iter().enumerate() {
                        if v > row[best] {
                            best = j;
                        }
                    }
                    best
                })
                .collect();
            Ok(Decoded {
                states,
                score: lat.log_likelihood,
            })
        }
    }
}

/// Explicit-duration Viterbi. Ties go to the lower state index and, for
/// durations, to the shorter segment.
fn viterbi(lp: &LogParams, obs: &[u32]) -> Decoded {
    let (t_len, n) = (obs.len(), lp.n);
    let mut delta = vec![f64::NEG_INFINITY; (t_len + 1) * n];
    let mut best_d = vec![0usize; (t_len + 1) * n];
    let mut enter = vec![f64::NEG_INFINITY; t_len * n];
    let mut from = vec![usize::MAX; t_len * n];
    enter[..n].copy_from_slice(&lp.pi);
    for e in 1..=t_len {
        for j in 0..n {
            let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
            let mut emis = 0.0;
            for d in 1..=lp.d_max.min(e) {
                let s = e - d;
                emis += lp.b[j][obs[s] as usize];
                if emis == f64::NEG_INFINITY {
                    break;
                }
                let v = enter[s * n + j] + lp.p[j][d - 1] + emis;
                if v > best {
                    (best, arg) = (v, d);
                }
            }
            delta[e * n + j] = best;
            best_d[e * n + j] = arg;
        }
        if e < t_len {
            for j in 0..n {
                let (mut best, mut arg) = (f64::NEG_INFINITY, usize::MAX);
                for i in (0..n).filter(|&i| i != j) {
                    let v = delta[e * n + i] + lp.a[i][j];
                    if v > best {
                        (best, arg) = (v, i);
                    }
                }
                enter[e * n + j] = best;
                from[e * n + j] = arg;
            }
        }
    }
    let mut state = 0;
    for j in 1..n {
        if delta[t_len * n + j] > delta[t_len * n + state] {
            state = j;
        }
    }
    let score = delta[t_len * n + state];
    let mut states = vec![0; t_len];
    let mut e = t_len;
    while e > 0 {
        let d = best_d[e * n + state].max(1);
        let s = e - d;
        states[s..e].fill(state);
        if s > 0 {
            state = from[s * n + state].min(n - 1);
        }
        e = s;
    }
    Decoded { states, score }
}

/// Additive smoothing then normalisation over the entries where `allowed`
/// holds; other entries are zero. A row with no mass at all falls back to
/// `fallback` when given, uniform otherwise.
fn normalise(counts: &[f64], alpha: f64, allowed: impl Fn(usize) -> bool, fallback: Option<&[f64]>) -> Vec<f64> {
    let smoothed: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| if allowed(k) { c + alpha } else { 0.0 })
        .collect();
    let total: f64 = smoothed.iter().sum();
    if total > 0.0 {
        return smoothed.iter().map(|&c| c / total).collect();
    }
    if let Some(row) = fallback {
        return row.to_vec();
    }
    let width = (0..counts.len()).filter(|&k| allowed(k)).count() as f64;
    (0..counts.len())
        .map(|k| if allowed(k) { 1.0 / width } else { 0.0 })
        .collect()
}

/// Expected (or hard) sufficient statistics.
#[derive(Debug, Clone)]
struct Counts {
    pi: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
}

impl Counts {
    fn zeros(n: usize, k: usize, d_max: usize) -> Self {
        Self {
            pi: vec![0.0; n],
            a: vec![vec![0.0; n]; n],
            b: vec![vec![0.0; k]; n],
            p: vec![vec![0.0; d_max]; n],
        }
    }

    fn merge(&mut self, other: &Counts) {
        let add = |x: &mut Vec<f64>, y: &Vec<f64>| x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
        add(&mut self.pi, &other.pi);
        for i in 0..self.pi.len() {
            add(&mut self.a[i], &other.a[i]);
            add(&mut self.b[i], &other.b[i]);
            add(&mut self.p[i], &other.p[i]);
        }
    }

    fn into_model(self, alpha: f64, previous: Option<&HsmmModel>) -> Result<HsmmModel> {
        let n = self.pi.len();
        let pi = normalise(&self.pi, alpha, |_| true, previous.map(|m| m.pi()));
        let a = (0..n)
            .map(|i| normalise(&self.a[i], alpha, |j| j != i, previous.map(|m| m.a[i].as_slice())))
            .collect();
        let b = (0..n)
            .map(|i| normalise(&self.b[i], alpha, |_| true, previous.map(|m| m.b[i].as_slice())))
            .collect();
        let p = (0..n)
            .map(|i| normalise(&self.p[i], alpha, |_| true, previous.map(|m| m.p[i].as_slice())))
            .collect();
        HsmmModel::new(pi, a, b, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub n_states: usize,
    pub alphabet_size: usize,
    pub d_max: usize,
    /// Pseudo-count added to every count before normalisation.
    pub smoothing: f64,
}

/// Counts segments, transitions, emissions and run lengths from labelled
/// sequences, then smooths and normalises them.
pub fn estimate_supervised(
    obs_seqs: &[Vec<u32>],
    state_seqs: &[Vec<usize>],
    config: &TrainingConfig,
) -> Result<HsmmModel> {
    if obs_seqs.is_empty() || obs_seqs.iter().all(Vec::is_empty) {
        return Err(Error::Empty("no training sequences"));
    }
    if obs_seqs.len() != state_seqs.len() {
        return Err(Error::LengthMismatch {
            expected: obs_seqs.len(),
            actual: state_seqs.len(),
        });
    }
    if !(config.smoothing >= 0.0 && config.smoothing.is_finite()) {
        return Err(Error::Config("smoothing must be a non-negative number".into()));
    }
    let TrainingConfig {
        n_states: n,
        alphabet_size: k,
        d_max,
        ..
    } = *config;
    if d_max == 0 {
        return Err(Error::Config("d_max must be at least 1".into()));
    }
    let mut counts = Counts::zeros(n, k, d_max);
    for (obs, states) in obs_seqs.iter().zip(state_seqs) {
        if obs.len() != states.len() {
            return Err(Error::LengthMismatch {
                expected: obs.len(),
                actual: states.len(),
            });
        }
        if obs.is_empty() {
            continue;
        }
        if let Some(&bad) = states.iter().find(|&&s| s >= n) {
            return Err(Error::Config(format!("state {bad} outside {n} states")));
        }
        if let Some(&bad) = obs.iter().find(|&&o| o as usize >= k) {
            return Err(Error::Config(format!("observation {bad} outside an alphabet of {k}")));
        }
        let mut previous: Option<usize> = None;
        for (start, end) in crate::ingest::runs(states) {
            let state = states[start];
            let run = end - start;
            if run > d_max {
                return Err(Error::DurationOverflow { run, d_max });
            }
            match previous {
                None => counts.pi[state] += 1.0,
                Some(prev) => counts.a[prev][state] += 1.0,
            }
            counts.p[state][run - 1] += 1.0;
            previous = Some(state);
        }
        for (&o, &s) in obs.iter().zip(states) {
            counts.b[s][o as usize] += 1.0;
        }
    }
    counts.into_model(config.smoothing, None)
}

fn expected_counts(model: &HsmmModel, lp: &LogParams, obs: &[u32]) -> Result<(f64, Counts)> {
    let lat = lattice(lp, obs);
    let ll = lat.log_likelihood;
    if !ll.is_finite() {
        return Err(Error::Numerical(format!("log-likelihood is {ll}")));
    }
    let (t_len, n) = (lat.t_len, lat.n);
    let mut counts = Counts::zeros(n, model.alphabet_size(), model.d_max());
    for j in 0..n {
        counts.pi[j] = (lp.pi[j] + lat.start[j] - ll).exp();
    }
    for e in 1..t_len {
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                counts.a[i][j] += (lat.alpha[e * n + i] + lp.a[i][j] + lat.start[e * n + j] - ll).exp();
            }
        }
    }
    for e in 1..=t_len {
        for j in 0..n {
            let tail = lat.beta[e * n + j] - ll;
            let mut emis = 0.0;
            for d in 1..=lp.d_max.min(e) {
                let s = e - d;
                emis += lp.b[j][obs[s] as usize];
                if emis == f64::NEG_INFINITY {
                    break;
                }
                counts.p[j][d - 1] += (lat.enter[s * n + j] + lp.p[j][d - 1] + emis + tail).exp();
            }
        }
    }
    let occ = lat.occupancy();
    for (t, &o) in obs.iter().enumerate() {
        for j in 0..n {
            counts.b[j][o as usize] += occ[t * n + j];
        }
    }
    Ok((ll, counts))
}

/// Log-likelihood and penalised objective after each EM iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmTrace {
    /// Total log-likelihood of the training set; entry 0 is the initial model.
    pub log_likelihood: Vec<f64>,
    /// Log-likelihood plus the log of the Dirichlet prior implied by the
    /// smoothing pseudo-count; the quantity EM is guaranteed not to decrease.
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub smoothing: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iter: 20,
            tol: 1e-6,
            smoothing: 1.0,
        }
    }
}

fn log_prior(model: &HsmmModel, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let n = model.n_states();
    let sum_ln = |row: &[f64]| row.iter().map(|x| x.ln()).sum::<f64>();
    let a: f64 = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| model.a[i][j].ln()).sum::<f64>())
        .sum();
    alpha
        * (sum_ln(&model.pi)
            + a
            + model.b.iter().map(|r| sum_ln(r)).sum::<f64>()
            + model.p.iter().map(|r| sum_ln(r)).sum::<f64>())
}

/// Explicit-duration Baum–Welch. The M-step adds `smoothing` to every
/// expected count, which keeps each entry above `smoothing / (count +
/// smoothing · K)`; with `smoothing = 0` it is plain maximum likelihood.
/// Rows that receive no expected mass keep their previous values.
pub fn em_refine(model: &HsmmModel, obs_seqs: &[Vec<u32>], config: &EmConfig) -> Result<(HsmmModel, EmTrace)> {
    if obs_seqs.is_empty() {
        return Err(Error::Empty("no training sequences"));
    }
    for obs in obs_seqs {
        model.check_observations(obs)?;
    }
    let e_step = |m: &HsmmModel| -> Result<(f64, Counts)> {
        use rayon::prelude::*;
        let lp = m.logs();
        let per_seq = obs_seqs
            .par_iter()
            .map(|obs| expected_counts(m, &lp, obs))
            .collect::<Result<Vec<_>>>()?;
        let mut total = Counts::zeros(m.n_states(), m.alphabet_size(), m.d_max());
        let mut ll = 0.0;
        for (l, c) in &per_seq {
            ll += l;
            total.merge(c);
        }
        Ok((ll, total))
    };
    let mut current = model.clone();
    let (mut ll, mut counts) = e_step(&current)?;
    let mut trace = EmTrace {
        log_likelihood: vec![ll],
        objective: vec![ll + log_prior(&current, config.smoothing)],
    };
    for _ in 0..config.max_iter {
        let next = counts.into_model(config.smoothing, Some(&current))?;
        let (next_ll, next_counts) = e_step(&next)?;
        current = next;
        counts = next_counts;
        let objective = next_ll + log_prior(&current, config.smoothing);
        let gain = objective - trace.objective.last().copied().unwrap_or(f64::NEG_INFINITY);
        trace.log_likelihood.push(next_ll);
        trace.objective.push(objective);
        ll = next_ll;
        if gain < config.tol {
            break;
        }
    }
    debug_assert!(ll.is_finite());
    Ok((current, trace))
}
