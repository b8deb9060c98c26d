use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn procdev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_procdev"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = procdev(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Relative path -> contents of every file under `dir`.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

/// A cohort small enough for a full rate sweep in a test: the default
/// generator with a truncated workflow.
fn small_cohort(dir: &Path, procedures: usize) -> PathBuf {
    let full = dir.join("full");
    ok(&["simulate", "--seed", "3", "--out", s(&full)]);
    let mut config: Value = serde_json::from_slice(&fs::read(full.join("generator.json")).unwrap()).unwrap();
    config["workflow"].as_array_mut().unwrap().truncate(14);
    let config_path = dir.join("small.json");
    fs::write(&config_path, serde_json::to_vec(&config).unwrap()).unwrap();
    let out = dir.join("small");
    ok(&[
        "simulate",
        "--seed",
        "3",
        "--procedures",
        &procedures.to_string(),
        "--config",
        s(&config_path),
        "--out",
        s(&out),
    ]);
    out.join("manifest.json")
}

fn write_identical_cohort(dir: &Path, n: usize) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let activities = "start_s,end_s,verb,instrument,target\n\
        0,1.5,cut,scalpel,skin\n\
        1.5,2.5,grasp,forceps,muscle\n\
        2.5,4,coagulate,bipolar,vessel\n\
        4,5,suture,needle_holder,skin\n";
    let mut procedures = Vec::new();
    for i in 0..n {
        let name = format!("p{i}.csv");
        fs::write(dir.join(&name), activities).unwrap();
        procedures.push(serde_json::json!({"id": format!("p{i}"), "activities": name}));
    }
    let manifest = dir.join("manifest.json");
    fs::write(
        &manifest,
        serde_json::to_vec(&serde_json::json!({ "procedures": procedures })).unwrap(),
    )
    .unwrap();
    manifest
}

#[test]
fn simulate_writes_cohort_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["simulate", "--seed", "7", "--out", s(&a)]);
    ok(&["simulate", "--seed", "7", "--out", s(&b)]);
    let files = snapshot(&a);
    assert_eq!(files, snapshot(&b));
    let names: Vec<_> = files.iter().map(|(p, _)| p.to_str().unwrap().to_string()).collect();
    assert!(names.contains(&"manifest.json".to_string()));
    assert_eq!(names.iter().filter(|n| n.ends_with("_activities.csv")).count(), 11);
    assert_eq!(names.iter().filter(|n| n.ends_with("_events.csv")).count(), 11);

    let c = tmp.path().join("c");
    ok(&["simulate", "--seed", "8", "--out", s(&c)]);
    assert_ne!(snapshot(&a), snapshot(&c));
}

#[test]
fn infeasible_event_fraction_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = procdev(&["simulate", "--event-fraction", "0.9", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("event fraction"));
}

#[test]
fn missing_manifest_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    for cmd in ["align", "train", "evaluate"] {
        let mut args = vec![cmd, "--manifest", s(&missing), "--out", s(tmp.path())];
        if cmd != "evaluate" {
            args.extend(["--rate", "2"]);
        }
        assert_eq!(procdev(&args).status.code(), Some(2), "{cmd}");
    }
}

#[test]
fn bad_usage_exits_two() {
    assert_eq!(procdev(&["align"]).status.code(), Some(2));
    assert_eq!(procdev(&["frobnicate"]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_identical_cohort(tmp.path(), 3);
    let out = procdev(&[
        "evaluate",
        "--manifest",
        s(&manifest),
        "--rates",
        "13",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn aligned_length_covers_longest_sequence() {
    let tmp = tempfile::tempdir().unwrap();
    let cohort = tmp.path().join("cohort");
    ok(&["simulate", "--out", s(&cohort)]);
    let out = tmp.path().join("aligned");
    ok(&[
        "align",
        "--manifest",
        s(&cohort.join("manifest.json")),
        "--rate",
        "2",
        "--out",
        s(&out),
    ]);
    let summary: Value = serde_json::from_slice(&fs::read(out.join("align.json")).unwrap()).unwrap();
    assert!(summary["aligned_length"].as_u64() >= summary["longest_sampled"].as_u64());
    let rows = fs::read_to_string(out.join("standard.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows as u64, summary["aligned_length"].as_u64().unwrap());
    assert_eq!(fs::read_dir(out.join("deviations")).unwrap().count(), 11);
}

#[test]
fn identical_cohort_standard_equals_input() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_identical_cohort(&tmp.path().join("in"), 3);
    let out = tmp.path().join("out");
    ok(&["align", "--manifest", s(&manifest), "--rate", "2", "--out", s(&out)]);
    ok(&[
        "ingest",
        "--manifest",
        s(&manifest),
        "--rate",
        "2",
        "--out",
        s(&tmp.path().join("sampled")),
    ]);
    let standard: Vec<String> = fs::read_to_string(out.join("standard.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).take(3).collect::<Vec<_>>().join(","))
        .collect();
    let sampled: Vec<String> = fs::read_to_string(tmp.path().join("sampled/p0.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(2).take(3).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(standard, sampled);
}

#[test]
fn perfect_cohort_scores_one() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_identical_cohort(&tmp.path().join("in"), 4);
    let out = tmp.path().join("run");
    ok(&["evaluate", "--manifest", s(&manifest), "--rates", "2", "--out", s(&out)]);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let header: Vec<&str> = summary.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("rate"), "2");
    assert_eq!(col("accuracy_mean"), "1");
    assert_eq!(col("recall_ND_mean"), "1");
}

#[test]
fn train_writes_fingerprinted_model() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_cohort(tmp.path(), 4);
    let model = tmp.path().join("model.json");
    ok(&["train", "--manifest", s(&manifest), "--rate", "4", "--out", s(&model)]);
    let json: Value = serde_json::from_slice(&fs::read(&model).unwrap()).unwrap();
    let vocab: procdev::Vocabulary =
        serde_json::from_slice(&fs::read(manifest.with_file_name("vocabulary.json")).unwrap()).unwrap();
    assert_eq!(
        json["classifier"]["vocabulary_fingerprint"],
        vocab.fingerprint().as_str()
    );
    assert_eq!(json["classifier"]["model"]["n_states"], 3);
    assert!(json["classifier"]["model"]["d_max"].as_u64().unwrap() >= 1);
}

#[test]
fn sweep_is_reproducible_and_replayable() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_cohort(tmp.path(), 5);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    ok(&[
        "--jobs",
        "1",
        "evaluate",
        "--manifest",
        s(&manifest),
        "--rates",
        "2..12,12.5",
        "--out",
        s(&a),
    ]);
    ok(&[
        "--jobs",
        "2",
        "evaluate",
        "--manifest",
        s(&manifest),
        "--rates",
        "2..12,12.5",
        "--out",
        s(&b),
    ]);
    assert_eq!(snapshot(&a), snapshot(&b));

    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 12);
    let trends = fs::read_to_string(a.join("trends.csv")).unwrap();
    assert_eq!(trends.lines().count(), 1 + 7);

    let run: Value = serde_json::from_slice(&fs::read(a.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["status"], "complete");
    ok(&["evaluate", "--replay", s(&a.join("run.json")), "--out", s(&c)]);
    assert_eq!(snapshot(&a), snapshot(&c));

    let errors = ok(&["errors", "--run", s(&a)]);
    assert_eq!(errors.stdout, fs::read(a.join("errors.csv")).unwrap());
}

#[test]
fn unfinished_run_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_identical_cohort(&tmp.path().join("in"), 3);
    let out = tmp.path().join("run");
    ok(&["evaluate", "--manifest", s(&manifest), "--rates", "2", "--out", s(&out)]);
    let run_path = out.join("run.json");
    let mut run: Value = serde_json::from_slice(&fs::read(&run_path).unwrap()).unwrap();
    run["status"] = "running".into();
    fs::write(&run_path, serde_json::to_vec(&run).unwrap()).unwrap();
    assert_eq!(procdev(&["errors", "--run", s(&out)]).status.code(), Some(2));
}
