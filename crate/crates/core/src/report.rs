//! File formats: cohort manifests, per-stage CSV dumps and the evaluation
//! report tables. Numbers are written with Rust's shortest round-trip float
//! formatting and undefined values as `NA`, so identical inputs give
//! byte-identical files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::align::AlignedSequence;
use crate::consensus::{DeviationTrace, ObservationSymbol, StandardProcess};
use crate::error::{Error, Result};
use crate::eval::{ErrorBreakdown, FoldResult, ObservationRecord, RateSummary, TrendRow};
use crate::ingest::{parse_annotations, write_activities, write_events, ContinuousSpm, SampleRate, SampledSequence};
use crate::model::{Activity, DeviationState, Vocabulary};
use crate::synthetic::GeneratedCohort;

pub const NA: &str = "NA";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |v| v.to_string())
}

/// Writes to a sibling temporary file and renames it over `path`, so a
/// reader never sees a half-written file.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut out = BufWriter::new(File::create(&tmp)?);
        write(&mut out)?;
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub activities: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<PathBuf>,
}

/// A cohort on disk. Relative paths are resolved against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocabulary: Option<PathBuf>,
    pub procedures: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCohort {
    pub vocabulary: Vocabulary,
    pub procedures: Vec<ContinuousSpm>,
}

/// Reads a manifest and every file it lists. Without a vocabulary file the
/// vocabulary grows from the annotations in manifest order.
pub fn load_cohort(manifest_path: &Path) -> Result<LoadedCohort> {
    let manifest: CohortManifest = read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let (mut vocabulary, grow) = match &manifest.vocabulary {
        Some(p) => (read_json::<Vocabulary>(&base.join(p))?, false),
        None => (Vocabulary::new(), true),
    };
    if manifest.procedures.is_empty() {
        return Err(Error::Empty("manifest lists no procedures"));
    }
    let procedures = manifest
        .procedures
        .iter()
        .map(|entry| {
            let activities = File::open(base.join(&entry.activities))?;
            let events = entry.events.as_ref().map(|p| File::open(base.join(p))).transpose()?;
            parse_annotations(&entry.id, activities, events, &mut vocabulary, grow)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedCohort { vocabulary, procedures })
}

/// Writes annotation files, `vocabulary.json` and `manifest.json` into
/// `dir`; returns the manifest path.
pub fn write_cohort(dir: &Path, vocabulary: &Vocabulary, procedures: &[ContinuousSpm]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(procedures.len());
    for spm in procedures {
        let activities = PathBuf::from(format!("{}_activities.csv", spm.procedure_id));
        let events = PathBuf::from(format!("{}_events.csv", spm.procedure_id));
        write_atomic(&dir.join(&activities), |w| write_activities(w, spm, vocabulary))?;
        write_atomic(&dir.join(&events), |w| write_events(w, spm))?;
        entries.push(ManifestEntry {
            id: spm.procedure_id.clone(),
            activities,
            events: Some(events),
        });
    }
    write_json_atomic(&dir.join("vocabulary.json"), vocabulary)?;
    let manifest_path = dir.join("manifest.json");
    write_json_atomic(
        &manifest_path,
        &CohortManifest {
            vocabulary: Some("vocabulary.json".into()),
            procedures: entries,
        },
    )?;
    Ok(manifest_path)
}

/// [`write_cohort`] plus the perturbation log as `ground_truth.json`.
pub fn write_generated(dir: &Path, cohort: &GeneratedCohort) -> Result<PathBuf> {
    let manifest = write_cohort(dir, &cohort.vocabulary, &cohort.procedures)?;
    write_json_atomic(&dir.join("ground_truth.json"), &cohort.log)?;
    Ok(manifest)
}

fn names(vocabulary: &Vocabulary, a: Activity) -> Result<[String; 3]> {
    Ok(vocabulary.names(a)?.map(String::from))
}

pub fn write_sampled(w: &mut dyn Write, seq: &SampledSequence, vocabulary: &Vocabulary) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "t_s", "verb", "instrument", "target", "event"])?;
    for (k, (&a, &e)) in seq.labels.iter().zip(&seq.event_mask).enumerate() {
        let [v, i, t] = names(vocabulary, a)?;
        out.write_record([
            k.to_string(),
            seq.rate.time_of(k).to_string(),
            v,
            i,
            t,
            u8::from(e).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per aligned instant; three columns per procedure.
pub fn write_aligned(w: &mut dyn Write, aligned: &[AlignedSequence], vocabulary: &Vocabulary) -> Result<()> {
    let len = aligned.first().map_or(0, |a| a.labels.len());
    if let Some(a) = aligned.iter().find(|a| a.labels.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            actual: a.labels.len(),
        });
    }
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    for a in aligned {
        for dim in ["verb", "instrument", "target"] {
            header.push(format!("{}.{dim}", a.procedure_id));
        }
    }
    out.write_record(&header)?;
    for t in 0..len {
        let mut row = vec![t.to_string()];
        for a in aligned {
            row.extend(names(vocabulary, a.labels[t])?);
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_standard(w: &mut dyn Write, standard: &StandardProcess, vocabulary: &Vocabulary) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "verb", "instrument", "target", "support"])?;
    for (t, (&a, &s)) in standard.labels.iter().zip(&standard.support).enumerate() {
        let [v, i, g] = names(vocabulary, a)?;
        out.write_record([t.to_string(), v, i, g, s.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// A deviation trace with, optionally, observation codes and predictions.
pub fn write_trace(
    w: &mut dyn Write,
    trace: &DeviationTrace,
    codes: Option<&[u32]>,
    predicted: Option<&[DeviationState]>,
    vocabulary: &Vocabulary,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "t",
        "verb",
        "instrument",
        "target",
        "distance",
        "true_state",
        "observation_code",
        "predicted_state",
    ])?;
    for t in 0..trace.len() {
        let [v, i, g] = names(vocabulary, trace.symbols[t].activity)?;
        out.write_record([
            t.to_string(),
            v,
            i,
            g,
            trace.distances[t].to_string(),
            trace.true_states[t].abbreviation().to_string(),
            codes.map_or_else(|| NA.to_string(), |c| c[t].to_string()),
            predicted.map_or_else(|| NA.to_string(), |p| p[t].abbreviation().to_string()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn per_state_header(prefix: &str) -> impl Iterator<Item = String> + '_ {
    DeviationState::ALL
        .into_iter()
        .map(move |s| format!("{prefix}_{}", s.abbreviation()))
}

pub fn write_folds(w: &mut dyn Write, folds: &[FoldResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["rate", "fold", "procedure_id", "instants", "accuracy"]
        .map(String::from)
        .to_vec();
    header.extend(per_state_header("recall"));
    header.extend(per_state_header("precision"));
    for truth in DeviationState::ALL {
        for pred in DeviationState::ALL {
            header.push(format!("n_{}_{}", truth.abbreviation(), pred.abbreviation()));
        }
    }
    out.write_record(&header)?;
    for f in folds {
        let mut row = vec![
            f.rate.to_string(),
            f.fold.to_string(),
            f.procedure_id.clone(),
            f.confusion.total().to_string(),
            f.metrics.accuracy.to_string(),
        ];
        row.extend(f.metrics.recall.iter().map(|&v| opt(v)));
        row.extend(f.metrics.precision.iter().map(|&v| opt(v)));
        row.extend(f.confusion.0.iter().flatten().map(u64::to_string));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Mean and 95% interval per metric and rate, plus the true state mix.
pub fn write_summaries(w: &mut dyn Write, summaries: &[RateSummary]) -> Result<()> {
    let mut metrics: Vec<String> = vec!["accuracy".into()];
    metrics.extend(per_state_header("recall"));
    metrics.extend(per_state_header("precision"));
    let mut header = vec!["rate".to_string(), "folds".to_string()];
    for m in &metrics {
        for suffix in ["mean", "ci_low", "ci_high", "undefined"] {
            header.push(format!("{m}_{suffix}"));
        }
    }
    header.extend(per_state_header("mix"));
    let mut out = csv::Writer::from_writer(w);
    out.write_record(&header)?;
    for s in summaries {
        let mut row = vec![s.rate.to_string(), s.folds.to_string()];
        for m in std::iter::once(&s.accuracy).chain(&s.recall).chain(&s.precision) {
            row.extend([opt(m.mean), opt(m.ci_low), opt(m.ci_high), m.undefined.to_string()]);
        }
        row.extend(s.state_mix.iter().map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trends(w: &mut dyn Write, trends: &[TrendRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["metric", "points", "tau", "p_value", "method", "significant", "note"])?;
    for row in trends {
        let fields = match &row.outcome {
            Ok(k) => [
                k.tau.to_string(),
                k.p_value.to_string(),
                serde_json::to_value(k.method)?.as_str().unwrap_or_default().to_string(),
                k.significant.to_string(),
                String::new(),
            ],
            Err(e) => [NA.into(), NA.into(), NA.into(), NA.into(), e.clone()],
        };
        let mut record = vec![row.metric.clone(), row.points.to_string()];
        record.extend(fields);
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_error_breakdowns(w: &mut dyn Write, rows: &[(SampleRate, ErrorBreakdown)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "rate",
        "rarely_wrong",
        "untrained",
        "correctly_trained",
        "other",
        "total",
    ])?;
    for (rate, b) in rows {
        out.write_record([
            rate.to_string(),
            b.rarely_wrong.to_string(),
            b.untrained.to_string(),
            b.correctly_trained.to_string(),
            b.other.to_string(),
            b.total().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Flat CSV form of an [`ObservationRecord`]; activities as raw codes.
#[derive(Debug, Serialize, Deserialize)]
struct RecordRow {
    fold: usize,
    t: usize,
    verb: u16,
    instrument: u16,
    target: u16,
    distance: u8,
    train_nd: u64,
    train_cd: u64,
    train_ed: u64,
    truth: String,
    predicted: String,
}

fn parse_state(s: &str) -> Result<DeviationState> {
    DeviationState::ALL
        .into_iter()
        .find(|d| d.abbreviation() == s)
        .ok_or_else(|| Error::Config(format!("unknown state {s:?}")))
}

pub fn write_records(w: &mut dyn Write, records: &[ObservationRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        let a = r.symbol.activity;
        out.serialize(RecordRow {
            fold: r.fold,
            t: r.t,
            verb: a.verb,
            instrument: a.instrument,
            target: a.target,
            distance: r.symbol.distance,
            train_nd: r.training_counts[0],
            train_cd: r.training_counts[1],
            train_ed: r.training_counts[2],
            truth: r.truth.abbreviation().into(),
            predicted: r.predicted.abbreviation().into(),
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records<R: std::io::Read>(reader: R) -> Result<Vec<ObservationRecord>> {
    csv::Reader::from_reader(reader)
        .deserialize::<RecordRow>()
        .map(|row| {
            let row = row?;
            Ok(ObservationRecord {
                fold: row.fold,
                t: row.t,
                symbol: ObservationSymbol {
                    activity: Activity::new(row.verb, row.instrument, row.target),
                    distance: row.distance,
                },
                training_counts: [row.train_nd, row.train_cd, row.train_ed],
                truth: parse_state(&row.truth)?,
                predicted: parse_state(&row.predicted)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, GeneratorConfig};

    #[test]
    fn cohort_round_trips_through_disk() {
        let dir = std::env::temp_dir().join(format!("procdev-report-{}", std::process::id()));
        let cohort = generate(&GeneratorConfig {
            procedures: 3,
            ..Default::default()
        })
        .unwrap();
        let manifest = write_generated(&dir, &cohort).unwrap();
        let loaded = load_cohort(&manifest).unwrap();
        assert_eq!(loaded.procedures, cohort.procedures);
        assert_eq!(loaded.vocabulary, cohort.vocabulary);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn records_round_trip() {
        let record = ObservationRecord {
            fold: 3,
            t: 17,
            symbol: ObservationSymbol {
                activity: Activity::new(4, 2, 9),
                distance: 2,
            },
            training_counts: [0, 5, 1],
            truth: DeviationState::ContextDeviation,
            predicted: DeviationState::EventDeviation,
        };
        let mut buf = Vec::new();
        write_records(&mut buf, &[record, record]).unwrap();
        assert_eq!(read_records(buf.as_slice()).unwrap(), vec![record, record]);
    }

    #[test]
    fn missing_values_are_na() {
        assert_eq!(opt(None), "NA");
        assert_eq!(opt(Some(0.5)), "0.5");
    }
}
