//! `procdev` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use procdev::align::{align_cohort, AlignConfig};
use procdev::classifier::{ClassifierConfig, DeviationClassifier};
use procdev::consensus::{standard_process, DeviationTrace};
use procdev::eval::{self, EvalConfig, FoldResult, ObservationRecord, RateSummary};
use procdev::hsmm::{DecodeMode, EmConfig};
use procdev::report::{self, LoadedCohort};
use procdev::synthetic::{self, GeneratorConfig};
use procdev::{sample, Activity, Error, SampleRate, SampledSequence};

type TableWriter<'a> = dyn Fn(&mut dyn std::io::Write) -> procdev::Result<()> + 'a;

#[derive(Parser)]
#[command(name = "procdev", version, about = "Deviation detection in recorded procedures")]
struct Cli {
    /// Worker threads for fold-level parallelism (0: one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort.
    Simulate(SimulateArgs),
    /// Validate a cohort and optionally write its sampled sequences.
    Ingest(IngestArgs),
    /// Align a cohort and write the standard process and deviations.
    Align(AlignArgs),
    /// Train a classifier on a whole cohort.
    Train(TrainArgs),
    /// Leave-one-out evaluation over sampling rates.
    Evaluate(EvaluateArgs),
    /// Recompute the false event-deviation breakdown of a finished run.
    Errors(ErrorsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    procedures: Option<usize>,
    /// Target fraction of event-deviation instants.
    #[arg(long)]
    event_fraction: Option<f64>,
    /// Full generator configuration as JSON; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    rate: Option<SampleRate>,
    #[arg(long, requires = "rate")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    rate: SampleRate,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Decode {
    Viterbi,
    Posterior,
}

#[derive(Args, Clone)]
struct HsmmArgs {
    #[arg(long, default_value_t = 1.5)]
    d_max_factor: f64,
    /// Additive smoothing for counted parameters.
    #[arg(long, default_value_t = 1.0)]
    smoothing: f64,
    /// Refine the counted parameters with EM.
    #[arg(long)]
    em: bool,
    #[arg(long, default_value_t = 20)]
    em_max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    em_tol: f64,
    #[arg(long, value_enum, default_value = "viterbi")]
    decode: Decode,
}

impl HsmmArgs {
    fn classifier(&self) -> ClassifierConfig {
        ClassifierConfig {
            d_max_factor: self.d_max_factor,
            smoothing: self.smoothing,
            em: self.em.then_some(EmConfig {
                max_iter: self.em_max_iter,
                tol: self.em_tol,
                smoothing: self.smoothing,
            }),
            decode: match self.decode {
                Decode::Viterbi => DecodeMode::Viterbi,
                Decode::Posterior => DecodeMode::Posterior,
            },
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    rate: SampleRate,
    /// Model JSON to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    hsmm: HsmmArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, required_unless_present = "replay")]
    manifest: Option<PathBuf>,
    /// Comma-separated rates and integer ranges, e.g. `2..12,12.5`.
    #[arg(long, default_value = "2..12,12.5")]
    rates: String,
    #[arg(long)]
    out: PathBuf,
    /// Re-run exactly the configuration recorded in a run manifest.
    #[arg(long, conflicts_with = "manifest")]
    replay: Option<PathBuf>,
    #[command(flatten)]
    hsmm: HsmmArgs,
}

#[derive(Args)]
struct ErrorsArgs {
    /// Output directory of an `evaluate` run.
    #[arg(long)]
    run: PathBuf,
}

/// A failure with its exit code: 2 for usage and configuration problems,
/// 1 for anything that goes wrong while computing.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }

    fn runtime(message: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: message.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn load(manifest: &Path) -> CliResult<LoadedCohort> {
    report::load_cohort(manifest).map_err(|e| Failure::config(format!("cannot load {}: {e}", manifest.display())))
}

fn sample_all(cohort: &LoadedCohort, rate: SampleRate) -> CliResult<Vec<SampledSequence>> {
    cohort
        .procedures
        .iter()
        .map(|p| sample(p, rate))
        .collect::<procdev::Result<_>>()
        .map_err(Failure::runtime)
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))
}

/// Parses `2..12,12.5` style lists; every rate must belong to the sweep.
fn parse_rates(list: &str) -> CliResult<Vec<SampleRate>> {
    let allowed = SampleRate::sweep();
    let mut rates = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let parse = |s: &str| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| Failure::config(format!("bad rate range {part:?}")))
            };
            let (lo, hi) = (parse(lo)?, parse(hi)?);
            if lo > hi {
                return Err(Failure::config(format!("empty rate range {part:?}")));
            }
            for hz in lo..=hi {
                rates.push(SampleRate::hz(hz).map_err(Failure::config)?);
            }
        } else {
            rates.push(part.parse().map_err(Failure::config)?);
        }
    }
    if rates.is_empty() {
        return Err(Failure::config("no rates given"));
    }
    if let Some(r) = rates.iter().find(|r| !allowed.contains(r)) {
        return Err(Failure::config(format!("rate {r} is outside 2..12 and 12.5")));
    }
    let mut seen = Vec::new();
    rates.retain(|r| {
        let new = !seen.contains(r);
        seen.push(*r);
        new
    });
    Ok(rates)
}

fn simulate(args: SimulateArgs) -> CliResult {
    let mut config = match &args.config {
        Some(p) => report::read_json::<GeneratorConfig>(p).map_err(Failure::config)?,
        None => GeneratorConfig::default(),
    };
    config.seed = args.seed;
    if let Some(n) = args.procedures {
        config.procedures = n;
    }
    if let Some(f) = args.event_fraction {
        if !(0.0..=1.0).contains(&f) {
            return Err(Failure::config(format!("event fraction {f} outside [0, 1]")));
        }
        config = config.with_event_fraction(f);
    }
    let cohort = synthetic::generate(&config).map_err(Failure::config)?;
    create_dir(&args.out)?;
    let manifest = report::write_generated(&args.out, &cohort).map_err(Failure::runtime)?;
    report::write_json_atomic(&args.out.join("generator.json"), &config).map_err(Failure::runtime)?;
    println!("{}", manifest.display());
    Ok(())
}

fn ingest(args: IngestArgs) -> CliResult {
    let cohort = load(&args.manifest)?;
    println!("procedures {}", cohort.procedures.len());
    println!("vocabulary {}", cohort.vocabulary.fingerprint());
    if let Some(rate) = args.rate {
        let sampled = sample_all(&cohort, rate)?;
        for s in &sampled {
            println!("{} {} samples", s.procedure_id, s.len());
        }
        if let Some(out) = &args.out {
            create_dir(out)?;
            for s in &sampled {
                report::write_atomic(&out.join(format!("{}.csv", s.procedure_id)), |w| {
                    report::write_sampled(w, s, &cohort.vocabulary)
                })
                .map_err(Failure::runtime)?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct AlignSummary {
    rate: SampleRate,
    procedures: Vec<String>,
    longest_sampled: usize,
    aligned_length: usize,
    dba_costs: Vec<u64>,
}

fn align(args: AlignArgs) -> CliResult {
    let cohort = load(&args.manifest)?;
    let sampled = sample_all(&cohort, args.rate)?;
    let aligned = align_cohort(&sampled, &AlignConfig::default(), None).map_err(Failure::runtime)?;
    let standard = standard_process(&aligned.aligned).map_err(Failure::runtime)?;
    let vocab = &cohort.vocabulary;
    create_dir(&args.out.join("deviations"))?;
    let run = || -> procdev::Result<()> {
        report::write_atomic(&args.out.join("aligned.csv"), |w| {
            report::write_aligned(w, &aligned.aligned, vocab)
        })?;
        report::write_atomic(&args.out.join("standard.csv"), |w| {
            report::write_standard(w, &standard, vocab)
        })?;
        for a in &aligned.aligned {
            let trace = DeviationTrace::new(&standard.labels, a)?;
            report::write_atomic(
                &args.out.join("deviations").join(format!("{}.csv", a.procedure_id)),
                |w| report::write_trace(w, &trace, None, None, vocab),
            )?;
        }
        report::write_json_atomic(
            &args.out.join("align.json"),
            &AlignSummary {
                rate: args.rate,
                procedures: sampled.iter().map(|s| s.procedure_id.clone()).collect(),
                longest_sampled: sampled.iter().map(SampledSequence::len).max().unwrap_or(0),
                aligned_length: standard.len(),
                dba_costs: aligned.dba_trace.clone(),
            },
        )
    };
    run().map_err(Failure::runtime)
}

/// A classifier together with what is needed to apply it to new cases.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    rate: SampleRate,
    standard: Vec<Activity>,
    classifier: DeviationClassifier,
}

fn train(args: TrainArgs) -> CliResult {
    let cohort = load(&args.manifest)?;
    let config = args.hsmm.classifier();
    let sampled = sample_all(&cohort, args.rate)?;
    let run = || -> procdev::Result<ModelFile> {
        let aligned = align_cohort(&sampled, &AlignConfig::default(), None)?;
        let standard = standard_process(&aligned.aligned)?;
        let traces = aligned
            .aligned
            .iter()
            .map(|a| DeviationTrace::new(&standard.labels, a))
            .collect::<procdev::Result<Vec<_>>>()?;
        let classifier =
            DeviationClassifier::train(&traces, &config)?.with_fingerprint(cohort.vocabulary.fingerprint());
        Ok(ModelFile {
            rate: args.rate,
            standard: standard.labels,
            classifier,
        })
    };
    let model = run().map_err(|e| match e {
        Error::Config(_) => Failure::config(e),
        e => Failure::runtime(e),
    })?;
    report::write_json_atomic(&args.out, &model).map_err(Failure::runtime)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RunStatus {
    /// Started but not finished; any outputs present are not valid.
    Running,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FileDigest {
    path: PathBuf,
    sha256: String,
}

/// Written before an evaluation starts and rewritten when it completes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunManifest {
    status: RunStatus,
    input_manifest: PathBuf,
    inputs: Vec<FileDigest>,
    vocabulary_fingerprint: String,
    rates: Vec<SampleRate>,
    config: EvalConfig,
    outputs: Vec<FileDigest>,
}

const RUN_MANIFEST: &str = "run.json";

fn input_digests(manifest: &Path) -> CliResult<Vec<FileDigest>> {
    let parsed: report::CohortManifest = report::read_json(manifest).map_err(Failure::config)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut paths = vec![manifest.to_path_buf()];
    paths.extend(parsed.vocabulary.iter().map(|p| base.join(p)));
    for entry in &parsed.procedures {
        paths.push(base.join(&entry.activities));
        paths.extend(entry.events.iter().map(|p| base.join(p)));
    }
    paths
        .into_iter()
        .map(|path| {
            let sha256 = report::sha256_file(&path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            Ok(FileDigest { path, sha256 })
        })
        .collect()
}

fn records_file(rate: SampleRate) -> PathBuf {
    PathBuf::from("records").join(format!("rate_{rate}.csv"))
}

fn evaluate(args: EvaluateArgs) -> CliResult {
    let (manifest_path, rates, config) = match &args.replay {
        Some(run) => {
            let recorded: RunManifest = report::read_json(run).map_err(Failure::config)?;
            let now = input_digests(&recorded.input_manifest)?;
            if now != recorded.inputs {
                return Err(Failure::config("inputs changed since the recorded run"));
            }
            (recorded.input_manifest, recorded.rates, recorded.config)
        }
        None => (
            args.manifest.clone().expect("required by clap"),
            parse_rates(&args.rates)?,
            EvalConfig {
                align: AlignConfig::default(),
                classifier: args.hsmm.classifier(),
            },
        ),
    };
    let cohort = load(&manifest_path)?;
    let inputs = input_digests(&manifest_path)?;
    create_dir(&args.out.join("records"))?;
    let mut run = RunManifest {
        status: RunStatus::Running,
        input_manifest: manifest_path,
        inputs,
        vocabulary_fingerprint: cohort.vocabulary.fingerprint(),
        rates: rates.clone(),
        config,
        outputs: Vec::new(),
    };
    let run_path = args.out.join(RUN_MANIFEST);
    report::write_json_atomic(&run_path, &run).map_err(Failure::runtime)?;

    let mut folds: Vec<FoldResult> = Vec::new();
    let mut summaries: Vec<RateSummary> = Vec::new();
    let mut written = Vec::new();
    for &rate in &rates {
        let sampled = sample_all(&cohort, rate)?;
        let outcomes = eval::loocv_sampled(&sampled, &config).map_err(|e| match e {
            Error::Config(_) => Failure::config(e),
            e => Failure::runtime(e),
        })?;
        let records: Vec<ObservationRecord> = outcomes.iter().flat_map(|o| o.records.iter().copied()).collect();
        let path = records_file(rate);
        report::write_atomic(&args.out.join(&path), |w| report::write_records(w, &records))
            .map_err(Failure::runtime)?;
        written.push(path);
        let summary = eval::summarize(rate, &outcomes);
        eprintln!(
            "rate {rate}: accuracy {}",
            summary.accuracy.mean.map_or("NA".into(), |m| format!("{m:.4}"))
        );
        folds.extend(outcomes.into_iter().map(|o| o.result));
        summaries.push(summary);
    }
    let trends = eval::trend_tests(&summaries);
    let errors: Vec<_> = summaries.iter().map(|s| (s.rate, s.errors)).collect();
    let tables: [(&str, Box<TableWriter>); 4] = [
        ("folds.csv", Box::new(|w| report::write_folds(w, &folds))),
        ("summary.csv", Box::new(|w| report::write_summaries(w, &summaries))),
        ("trends.csv", Box::new(|w| report::write_trends(w, &trends))),
        ("errors.csv", Box::new(|w| report::write_error_breakdowns(w, &errors))),
    ];
    for (name, write) in tables {
        report::write_atomic(&args.out.join(name), write).map_err(Failure::runtime)?;
        written.push(PathBuf::from(name));
    }
    run.outputs = written
        .into_iter()
        .map(|path| {
            let sha256 = report::sha256_file(&args.out.join(&path)).map_err(Failure::runtime)?;
            Ok(FileDigest { path, sha256 })
        })
        .collect::<CliResult<_>>()?;
    run.status = RunStatus::Complete;
    report::write_json_atomic(&run_path, &run).map_err(Failure::runtime)
}

fn errors(args: ErrorsArgs) -> CliResult {
    let run: RunManifest = report::read_json(&args.run.join(RUN_MANIFEST)).map_err(Failure::config)?;
    if run.status != RunStatus::Complete {
        return Err(Failure::config(format!(
            "run in {} did not complete",
            args.run.display()
        )));
    }
    let mut rows = Vec::new();
    for &rate in &run.rates {
        let file = std::fs::File::open(args.run.join(records_file(rate))).map_err(Failure::config)?;
        let records = report::read_records(file).map_err(Failure::runtime)?;
        rows.push((rate, eval::categorize_errors(&records)));
    }
    report::write_error_breakdowns(&mut std::io::stdout().lock(), &rows).map_err(Failure::runtime)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Ingest(a) => ingest(a),
        Command::Align(a) => align(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Errors(a) => errors(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
