//! Offline detection and classification of deviations in recorded
//! procedures described as sequences of (verb, instrument, target)
//! activities.
//!
//! The pipeline: [`ingest`] annotations and sample them at a fixed rate,
//! [`align`] a cohort with multi-dimensional DTW and DBA, derive the
//! [`consensus`] standard process and per-instant deviations, then classify
//! each instant with an explicit-duration [`hsmm`]. [`eval`] runs
//! leave-one-out validation across sampling rates and [`synthetic`] makes
//! cohorts to run it on.

pub mod align;
pub mod classifier;
pub mod consensus;
pub mod error;
pub mod eval;
pub mod hsmm;
pub mod ingest;
pub mod model;
pub mod report;
pub mod synthetic;

pub use error::{Error, Result};
pub use ingest::{sample, ContinuousSpm, SampleRate, SampledSequence};
pub use model::{Activity, DeviationState, Vocabulary};
