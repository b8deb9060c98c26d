//! Seeded synthetic cohorts: a base workflow, per-procedure context
//! perturbations and injected bleeding-like event segments.
//!
//! Generation happens in two stages. [`plan`] draws every random decision
//! into a [`PerturbationLog`]; [`replay`] turns a log and the base workflow
//! into timelines without touching a random number generator. Times are kept
//! in whole milliseconds so the CSV round trip is exact.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ActivityInterval, ContinuousSpm, EventInterval};
use crate::model::{Activity, DeviationState, Vocabulary};

pub const EVENT_KIND: &str = "bleeding";

const VERBS: [&str; 10] = [
    "aspirate",
    "coagulate",
    "cut",
    "dissect",
    "drill",
    "grasp",
    "irrigate",
    "retract",
    "suture",
    "clip",
];
const INSTRUMENTS: [&str; 10] = [
    "aspirator",
    "bipolar",
    "scissors",
    "scalpel",
    "drill",
    "forceps",
    "irrigator",
    "retractor",
    "needle_holder",
    "clip_applier",
];
const TARGETS: [&str; 12] = [
    "skin",
    "muscle",
    "bone",
    "dura",
    "arachnoid",
    "cortex",
    "tumor",
    "vessel",
    "nerve",
    "csf",
    "blood",
    "gauze",
];

/// One base workflow step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkflowStep {
    pub activity: Activity,
    pub mean_s: f64,
    /// Durations are drawn uniformly from `mean_s ± jitter_s`.
    pub jitter_s: f64,
}

/// Per-step probabilities of the three context perturbations. At most one
/// applies to a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub substitute: f64,
    pub insert: f64,
    pub delete: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    /// Inclusive range of events per procedure.
    pub count: (usize, usize),
    /// Inclusive range of a single event's length in seconds.
    pub duration_s: (f64, f64),
    /// Activities performed only while responding to an event.
    pub response: Vec<Activity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub vocabulary: Vocabulary,
    pub workflow: Vec<WorkflowStep>,
    /// Activities used for substitutions and insertions.
    pub context_pool: Vec<Activity>,
    pub perturbation: Perturbation,
    pub events: EventSpec,
    pub procedures: usize,
    /// Approximate fraction of instants per state. The event share sets the
    /// expected event time; the context share is governed by the
    /// perturbation rates.
    pub target_mix: [f64; DeviationState::COUNT],
}

fn default_vocabulary() -> Vocabulary {
    let list = |names: &[&str]| {
        std::iter::once(crate::model::IDLE)
            .chain(names.iter().copied())
            .map(String::from)
            .collect::<Vec<_>>()
    };
    Vocabulary::from_lists([list(&VERBS), list(&INSTRUMENTS), list(&TARGETS)]).expect("static vocabulary")
}

fn named(vocabulary: &Vocabulary, verb: &str, instrument: &str, target: &str) -> Activity {
    vocabulary.activity(verb, instrument, target).expect("static activity")
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let vocabulary = default_vocabulary();
        let response = vec![
            named(&vocabulary, "coagulate", "bipolar", "vessel"),
            named(&vocabulary, "aspirate", "aspirator", "blood"),
            named(&vocabulary, "irrigate", "irrigator", "blood"),
        ];
        // Fixed seed: the default workflow is part of the configuration, not
        // of the per-cohort randomness.
        let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_f10e);
        let mut pool: Vec<Activity> = Vec::new();
        while pool.len() < 24 {
            let a = Activity::new(
                rng.random_range(1..=VERBS.len() as u16),
                rng.random_range(1..=INSTRUMENTS.len() as u16),
                rng.random_range(1..=TARGETS.len() as u16),
            );
            if !response.contains(&a) && !pool.contains(&a) {
                pool.push(a);
            }
        }
        let mut workflow: Vec<WorkflowStep> = Vec::with_capacity(61);
        while workflow.len() < 61 {
            let activity = pool[rng.random_range(0..pool.len())];
            if workflow.last().is_some_and(|s| s.activity == activity) {
                continue;
            }
            let mean_s = rng.random_range(2.0..5.0_f64);
            workflow.push(WorkflowStep {
                activity,
                mean_s: (mean_s * 10.0).round() / 10.0,
                jitter_s: (mean_s * 3.0).round() / 10.0,
            });
        }
        Self {
            seed: 0,
            vocabulary,
            workflow,
            context_pool: pool,
            perturbation: Perturbation {
                substitute: 0.12,
                insert: 0.08,
                delete: 0.05,
            },
            events: EventSpec {
                count: (0, 2),
                duration_s: (4.0, 40.0),
                response,
            },
            procedures: 11,
            target_mix: [0.6841, 0.2586, 0.0573],
        }
    }
}

impl GeneratorConfig {
    /// Sets the target event share, rescaling the other two to fill the rest.
    pub fn with_event_fraction(mut self, fraction: f64) -> Self {
        let rest = self.target_mix[0] + self.target_mix[1];
        let scale = if rest > 0.0 { (1.0 - fraction) / rest } else { 0.0 };
        self.target_mix = [self.target_mix[0] * scale, self.target_mix[1] * scale, fraction];
        self
    }

    /// Expected workflow length in seconds.
    pub fn nominal_duration(&self) -> f64 {
        self.workflow.iter().map(|s| s.mean_s).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.procedures < 3 {
            return bad(format!("cohort size must be at least 3, got {}", self.procedures));
        }
        if self.workflow.is_empty() {
            return bad("base workflow is empty".into());
        }
        for (i, step) in self.workflow.iter().enumerate() {
            self.vocabulary.check(step.activity)?;
            if step.activity.is_idle() {
                return bad(format!("workflow step {i} is idle"));
            }
            if !(step.mean_s > 0.0 && step.jitter_s >= 0.0 && step.jitter_s < step.mean_s) {
                return bad(format!("workflow step {i} needs mean > jitter >= 0"));
            }
        }
        let p = &self.perturbation;
        for (name, v) in [("substitute", p.substitute), ("insert", p.insert), ("delete", p.delete)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} probability {v} outside [0, 1]"));
            }
        }
        if p.substitute + p.insert + p.delete > 1.0 {
            return bad("perturbation probabilities sum past 1".into());
        }
        if (p.substitute > 0.0 || p.insert > 0.0) && self.context_pool.len() < 2 {
            return bad("context pool needs at least two activities".into());
        }
        let e = &self.events;
        if e.count.0 > e.count.1 {
            return bad("event count range is empty".into());
        }
        if !(e.duration_s.0 > 0.0 && e.duration_s.0 <= e.duration_s.1) {
            return bad("event durations must be positive and ordered".into());
        }
        for &a in e.response.iter().chain(&self.context_pool) {
            self.vocabulary.check(a)?;
        }
        if let Some(a) = e
            .response
            .iter()
            .find(|a| self.context_pool.contains(a) || self.workflow.iter().any(|s| s.activity == **a))
        {
            return bad(format!("response activity {:?} also occurs outside events", a.codes()));
        }
        let mix = self.target_mix;
        if mix.iter().any(|&m| !(0.0..=1.0).contains(&m)) || (mix.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return bad(format!("target mix {mix:?} is not a distribution"));
        }
        let event = mix[DeviationState::EventDeviation.index()];
        if event > 0.5 {
            return bad(format!("event fraction {event} is infeasible (at most 0.5)"));
        }
        if event > 0.0 && (e.count.1 == 0 || e.response.is_empty()) {
            return bad("a positive event fraction needs events and response activities".into());
        }
        Ok(())
    }

    /// Mean length of one event given the target event share.
    fn mean_event_s(&self) -> f64 {
        let share = self.target_mix[DeviationState::EventDeviation.index()];
        let mean_count = (self.events.count.0 + self.events.count.1) as f64 / 2.0;
        if share == 0.0 || mean_count == 0.0 {
            return 0.0;
        }
        self.nominal_duration() * share / (1.0 - share) / mean_count
    }
}

/// One entry of a procedure's timeline recipe, in timeline order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Step {
    Keep {
        index: usize,
        duration_ms: u64,
    },
    Substitute {
        index: usize,
        activity: Activity,
        duration_ms: u64,
    },
    Insert {
        activity: Activity,
        duration_ms: u64,
    },
    Delete {
        index: usize,
    },
    /// A response sequence interrupting the workflow; the event interval
    /// spans all of it.
    Event {
        response: Vec<(Activity, u64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureLog {
    pub procedure_id: String,
    pub seed: u64,
    pub steps: Vec<Step>,
}

/// Ground truth for a cohort: every random decision taken while generating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationLog {
    pub seed: u64,
    pub procedures: Vec<ProcedureLog>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCohort {
    pub procedures: Vec<ContinuousSpm>,
    pub vocabulary: Vocabulary,
    pub log: PerturbationLog,
}

pub fn procedure_id(index: usize) -> String {
    format!("P{:02}", index + 1)
}

fn draw_ms(rng: &mut ChaCha8Rng, mean_s: f64, jitter_s: f64) -> u64 {
    let s = if jitter_s > 0.0 {
        rng.random_range(mean_s - jitter_s..=mean_s + jitter_s)
    } else {
        mean_s
    };
    ((s * 1000.0).round() as u64).max(1)
}

fn pick_other(rng: &mut ChaCha8Rng, pool: &[Activity], avoid: Activity) -> Activity {
    loop {
        let a = pool[rng.random_range(0..pool.len())];
        if a != avoid {
            return a;
        }
    }
}

fn plan_procedure(config: &GeneratorConfig, procedure_id: String, seed: u64) -> ProcedureLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = &config.perturbation;
    let mut steps = Vec::with_capacity(config.workflow.len() + 8);
    for (index, step) in config.workflow.iter().enumerate() {
        let u: f64 = rng.random();
        let duration_ms = draw_ms(&mut rng, step.mean_s, step.jitter_s);
        if u < p.substitute {
            let activity = pick_other(&mut rng, &config.context_pool, step.activity);
            steps.push(Step::Substitute {
                index,
                activity,
                duration_ms,
            });
        } else if u < p.substitute + p.insert {
            steps.push(Step::Keep { index, duration_ms });
            let activity = pick_other(&mut rng, &config.context_pool, step.activity);
            let mean = config.workflow.iter().map(|s| s.mean_s).sum::<f64>() / config.workflow.len() as f64;
            let duration_ms = draw_ms(&mut rng, mean, mean / 2.0);
            steps.push(Step::Insert { activity, duration_ms });
        } else if u < p.substitute + p.insert + p.delete {
            steps.push(Step::Delete { index });
        } else {
            steps.push(Step::Keep { index, duration_ms });
        }
    }

    let events = &config.events;
    let count = rng.random_range(events.count.0..=events.count.1);
    let mean_event = config.mean_event_s();
    if count > 0 && mean_event > 0.0 {
        // Distinct insertion points, each after some step.
        let mut points: Vec<usize> = Vec::with_capacity(count);
        while points.len() < count.min(steps.len()) {
            let at = rng.random_range(1..=steps.len());
            if !points.contains(&at) {
                points.push(at);
            }
        }
        points.sort_unstable_by(|a, b| b.cmp(a));
        let mut events_out: Vec<(usize, Step)> = Vec::new();
        for at in points {
            let total_s = (mean_event * rng.random_range(0.5..1.5)).clamp(events.duration_s.0, events.duration_s.1);
            let total_ms = (total_s * 1000.0).round() as u64;
            let parts = rng.random_range(1..=3usize).min(total_ms as usize);
            let mut response = Vec::with_capacity(parts);
            let mut left = total_ms;
            let mut last = None;
            for k in 0..parts {
                let ms = if k + 1 == parts {
                    left
                } else {
                    let share = left / (parts - k) as u64;
                    rng.random_range(share / 2..=share + share / 2)
                        .clamp(1, left - (parts - k - 1) as u64)
                };
                left -= ms;
                let activity = if events.response.len() > 1 {
                    loop {
                        let a = events.response[rng.random_range(0..events.response.len())];
                        if Some(a) != last {
                            break a;
                        }
                    }
                } else {
                    events.response[0]
                };
                last = Some(activity);
                response.push((activity, ms));
            }
            events_out.push((at, Step::Event { response }));
        }
        for (at, step) in events_out {
            steps.insert(at, step);
        }
    }
    ProcedureLog {
        procedure_id,
        seed,
        steps,
    }
}

/// Draws the perturbation log for a whole cohort.
pub fn plan(config: &GeneratorConfig) -> Result<PerturbationLog> {
    config.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let seeds: Vec<u64> = (0..config.procedures).map(|_| master.next_u64()).collect();
    Ok(PerturbationLog {
        seed: config.seed,
        procedures: seeds
            .into_iter()
            .enumerate()
            .map(|(i, seed)| plan_procedure(config, procedure_id(i), seed))
            .collect(),
    })
}

fn seconds(ms: u64) -> f64 {
    ms as f64 / 1000.0
}

/// Rebuilds one timeline from its recipe.
pub fn replay_procedure(workflow: &[WorkflowStep], log: &ProcedureLog) -> Result<ContinuousSpm> {
    let mut clock = 0u64;
    let mut activities = Vec::new();
    let mut events = Vec::new();
    let mut push = |activity: Activity, ms: u64, clock: &mut u64| {
        activities.push(ActivityInterval {
            start_s: seconds(*clock),
            end_s: seconds(*clock + ms),
            activity,
        });
        *clock += ms;
    };
    let base = |index: usize| {
        workflow
            .get(index)
            .map(|s| s.activity)
            .ok_or_else(|| Error::Config(format!("log refers to workflow step {index} of {}", workflow.len())))
    };
    for step in &log.steps {
        match step {
            Step::Keep { index, duration_ms } => push(base(*index)?, *duration_ms, &mut clock),
            Step::Substitute {
                index,
                activity,
                duration_ms,
            } => {
                base(*index)?;
                push(*activity, *duration_ms, &mut clock)
            }
            Step::Insert { activity, duration_ms } => push(*activity, *duration_ms, &mut clock),
            Step::Delete { index } => {
                base(*index)?;
            }
            Step::Event { response } => {
                let start = clock;
                for &(activity, ms) in response {
                    push(activity, ms, &mut clock);
                }
                events.push(EventInterval {
                    start_s: seconds(start),
                    end_s: seconds(clock),
                    kind: EVENT_KIND.to_string(),
                });
            }
        }
    }
    ContinuousSpm::new(log.procedure_id.clone(), activities, events)
}

pub fn replay(workflow: &[WorkflowStep], log: &PerturbationLog) -> Result<Vec<ContinuousSpm>> {
    log.procedures.iter().map(|p| replay_procedure(workflow, p)).collect()
}

/// Generates a cohort; deterministic in `config`.
pub fn generate(config: &GeneratorConfig) -> Result<GeneratedCohort> {
    let log = plan(config)?;
    Ok(GeneratedCohort {
        procedures: replay(&config.workflow, &log)?,
        vocabulary: config.vocabulary.clone(),
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape() {
        let config = GeneratorConfig::default();
        config.validate().unwrap();
        assert_eq!(config.workflow.len(), 61);
        assert_eq!(config.vocabulary.len(crate::model::Dimension::Verb), 11);
        assert_eq!(config.vocabulary.len(crate::model::Dimension::Target), 13);
        let cohort = generate(&config).unwrap();
        assert_eq!(cohort.procedures.len(), 11);
    }

    #[test]
    fn unperturbed_cohort_follows_the_workflow() {
        let mut config = GeneratorConfig {
            perturbation: Perturbation {
                substitute: 0.0,
                insert: 0.0,
                delete: 0.0,
            },
            ..GeneratorConfig::default()
        };
        config.events.count = (0, 0);
        config = config.with_event_fraction(0.0);
        let cohort = generate(&config).unwrap();
        let base: Vec<Activity> = config.workflow.iter().map(|s| s.activity).collect();
        for spm in &cohort.procedures {
            let seq: Vec<Activity> = spm.activities().iter().map(|a| a.activity).collect();
            assert_eq!(seq, base);
            assert!(spm.events().is_empty());
            for (a, s) in spm.activities().iter().zip(&config.workflow) {
                let d = a.end_s - a.start_s;
                assert!(d >= s.mean_s - s.jitter_s - 1e-9 && d <= s.mean_s + s.jitter_s + 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let config = GeneratorConfig::default();
        assert_eq!(generate(&config).unwrap(), generate(&config).unwrap());
        let other = GeneratorConfig {
            seed: 1,
            ..config.clone()
        };
        assert_ne!(
            generate(&config).unwrap().procedures,
            generate(&other).unwrap().procedures
        );
    }

    #[test]
    fn log_replay_reproduces_cohort() {
        let config = GeneratorConfig {
            seed: 99,
            ..Default::default()
        };
        let cohort = generate(&config).unwrap();
        let json = serde_json::to_string(&cohort.log).unwrap();
        let log: PerturbationLog = serde_json::from_str(&json).unwrap();
        assert_eq!(replay(&config.workflow, &log).unwrap(), cohort.procedures);
    }

    #[test]
    fn events_overlap_response_activities() {
        for seed in 0..20 {
            let config = GeneratorConfig {
                seed,
                ..Default::default()
            };
            for spm in generate(&config).unwrap().procedures {
                for e in spm.events() {
                    assert!(spm.activities().iter().any(|a| {
                        a.start_s < e.end_s && e.start_s < a.end_s && config.events.response.contains(&a.activity)
                    }));
                }
            }
        }
    }

    #[test]
    fn infeasible_configurations() {
        let config = GeneratorConfig::default();
        assert!(matches!(
            config.clone().with_event_fraction(0.9).validate(),
            Err(Error::Config(_))
        ));
        assert!(GeneratorConfig {
            procedures: 2,
            ..config.clone()
        }
        .validate()
        .is_err());
        let mut c = config.clone();
        c.perturbation.insert = 1.5;
        assert!(c.validate().is_err());
        let mut c = config.clone();
        c.context_pool.push(c.events.response[0]);
        assert!(c.validate().is_err());
        let mut c = config;
        c.workflow[0].jitter_s = c.workflow[0].mean_s;
        assert!(c.validate().is_err());
    }
}
