//! Python bindings. Activities cross the boundary as `(verb, instrument,
//! target)` code triples and sampling rates as decimal strings or floats.

use std::path::PathBuf;

use procdev::align::{self, AlignConfig};
use procdev::classifier::ClassifierConfig;
use procdev::consensus::standard_process;
use procdev::eval::{self, EvalConfig, KendallTrend, MetricSummary};
use procdev::hsmm::{self, DecodeMode, EmConfig, TrainingConfig};
use procdev::report;
use procdev::synthetic::{self, GeneratorConfig};
use procdev::{Activity, ContinuousSpm, SampleRate, SampledSequence, Vocabulary};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Codes = (u16, u16, u16);

fn err(e: procdev::Error) -> PyErr {
    match e {
        procdev::Error::Config(_)
        | procdev::Error::Parse { .. }
        | procdev::Error::UnknownSymbol { .. }
        | procdev::Error::InvalidTimeline(_)
        | procdev::Error::Empty(_)
        | procdev::Error::LengthMismatch { .. }
        | procdev::Error::VocabularyMismatch(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn activity((v, i, t): Codes) -> Activity {
    Activity::from_codes([v, i, t])
}

fn codes(a: Activity) -> Codes {
    let [v, i, t] = a.codes();
    (v, i, t)
}

fn activities(seq: &[Codes]) -> Vec<Activity> {
    seq.iter().copied().map(activity).collect()
}

fn rate_of(rate: &Bound<'_, PyAny>) -> PyResult<SampleRate> {
    rate.str()?.to_str()?.parse().map_err(err)
}

/// Number of differing components between two activities.
#[pyfunction]
fn distance(a: Codes, b: Codes) -> u8 {
    activity(a).distance(activity(b))
}

/// DTW between two activity sequences: `(cost, [(i, j), ...])`.
#[pyfunction]
fn dtw(q: Vec<Codes>, c: Vec<Codes>) -> PyResult<(u64, Vec<(usize, usize)>)> {
    let (cost, path) = align::dtw(&activities(&q), &activities(&c)).map_err(err)?;
    Ok((cost, path.pairs().to_vec()))
}

/// Kendall tau-b trend test of `values` against `x`.
#[pyfunction]
fn kendall_trend<'py>(py: Python<'py>, x: Vec<f64>, values: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let k = eval::kendall_tau_trend(&x, &values).map_err(err)?;
    trend_dict(py, &k)
}

fn trend_dict<'py>(py: Python<'py>, k: &KendallTrend) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("tau", k.tau)?;
    d.set_item("p_value", k.p_value)?;
    d.set_item("significant", k.significant)?;
    d.set_item("score", k.score)?;
    d.set_item("method", serde_json::to_value(k.method).unwrap().as_str())?;
    Ok(d)
}

/// The evaluation sweep as decimal strings.
#[pyfunction]
fn sweep_rates() -> Vec<String> {
    SampleRate::sweep().into_iter().map(|r| r.to_string()).collect()
}

/// Explicit-duration hidden semi-Markov model.
#[pyclass(module = "procdev_py", name = "Hsmm", from_py_object)]
#[derive(Clone)]
struct PyHsmm(hsmm::HsmmModel);

#[pymethods]
impl PyHsmm {
    #[new]
    fn new(pi: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, p: Vec<Vec<f64>>) -> PyResult<Self> {
        hsmm::HsmmModel::new(pi, a, b, p).map(Self).map_err(err)
    }

    /// Supervised estimate from labelled sequences.
    #[staticmethod]
    #[pyo3(signature = (obs_seqs, state_seqs, n_states, alphabet_size, d_max, smoothing = 1.0))]
    fn fit(
        obs_seqs: Vec<Vec<u32>>,
        state_seqs: Vec<Vec<usize>>,
        n_states: usize,
        alphabet_size: usize,
        d_max: usize,
        smoothing: f64,
    ) -> PyResult<Self> {
        let config = TrainingConfig {
            n_states,
            alphabet_size,
            d_max,
            smoothing,
        };
        hsmm::estimate_supervised(&obs_seqs, &state_seqs, &config)
            .map(Self)
            .map_err(err)
    }

    /// Baum–Welch refinement; returns the new model and the per-iteration
    /// `(log_likelihood, objective)` traces. Only the objective is monotone
    /// when `smoothing > 0`.
    #[pyo3(signature = (obs_seqs, max_iter = 20, tol = 1e-6, smoothing = 1.0))]
    fn refine(
        &self,
        py: Python<'_>,
        obs_seqs: Vec<Vec<u32>>,
        max_iter: usize,
        tol: f64,
        smoothing: f64,
    ) -> PyResult<(Self, Vec<f64>, Vec<f64>)> {
        let config = EmConfig {
            max_iter,
            tol,
            smoothing,
        };
        let (model, trace) = py
            .detach(|| hsmm::em_refine(&self.0, &obs_seqs, &config))
            .map_err(err)?;
        Ok((Self(model), trace.log_likelihood, trace.objective))
    }

    fn likelihood(&self, obs: Vec<u32>) -> PyResult<f64> {
        hsmm::likelihood(&self.0, &obs).map_err(err)
    }

    /// `(states, score)`; `mode` is "viterbi" or "posterior".
    #[pyo3(signature = (obs, mode = "viterbi"))]
    fn decode(&self, obs: Vec<u32>, mode: &str) -> PyResult<(Vec<usize>, f64)> {
        let mode = match mode {
            "viterbi" => DecodeMode::Viterbi,
            "posterior" => DecodeMode::Posterior,
            other => return Err(PyValueError::new_err(format!("unknown decode mode {other:?}"))),
        };
        let d = hsmm::decode(&self.0, &obs, mode).map_err(err)?;
        Ok((d.states, d.score))
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.0.n_states()
    }

    #[getter]
    fn alphabet_size(&self) -> usize {
        self.0.alphabet_size()
    }

    #[getter]
    fn d_max(&self) -> usize {
        self.0.d_max()
    }

    #[getter]
    fn pi(&self) -> Vec<f64> {
        self.0.pi().to_vec()
    }

    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        self.0.a().to_vec()
    }

    #[getter]
    fn b(&self) -> Vec<Vec<f64>> {
        self.0.b().to_vec()
    }

    #[getter]
    fn p(&self) -> Vec<Vec<f64>> {
        self.0.p().to_vec()
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).unwrap()
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        serde_json::from_str(s)
            .map(Self)
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Hsmm(n_states={}, alphabet_size={}, d_max={})",
            self.0.n_states(),
            self.0.alphabet_size(),
            self.0.d_max()
        )
    }
}

/// A cohort of annotated procedures with its vocabulary.
#[pyclass(module = "procdev_py", name = "Cohort")]
struct PyCohort {
    vocabulary: Vocabulary,
    procedures: Vec<ContinuousSpm>,
}

impl PyCohort {
    fn sampled(&self, rate: SampleRate) -> PyResult<Vec<SampledSequence>> {
        self.procedures
            .iter()
            .map(|p| procdev::sample(p, rate))
            .collect::<procdev::Result<_>>()
            .map_err(err)
    }
}

fn summary_dict<'py>(py: Python<'py>, m: &MetricSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mean", m.mean)?;
    d.set_item("ci_low", m.ci_low)?;
    d.set_item("ci_high", m.ci_high)?;
    d.set_item("undefined", m.undefined)?;
    Ok(d)
}

#[pymethods]
impl PyCohort {
    #[staticmethod]
    fn load(manifest: PathBuf) -> PyResult<Self> {
        let c = report::load_cohort(&manifest).map_err(err)?;
        Ok(Self {
            vocabulary: c.vocabulary,
            procedures: c.procedures,
        })
    }

    /// Seeded synthetic cohort from the default generator.
    #[staticmethod]
    #[pyo3(signature = (seed = 0, procedures = None, event_fraction = None))]
    fn simulate(seed: u64, procedures: Option<usize>, event_fraction: Option<f64>) -> PyResult<Self> {
        let mut config = GeneratorConfig {
            seed,
            ..GeneratorConfig::default()
        };
        if let Some(n) = procedures {
            config.procedures = n;
        }
        if let Some(f) = event_fraction {
            config = config.with_event_fraction(f);
        }
        let g = synthetic::generate(&config).map_err(err)?;
        Ok(Self {
            vocabulary: g.vocabulary,
            procedures: g.procedures,
        })
    }

    /// Writes annotation files and a manifest; returns the manifest path.
    fn save(&self, dir: PathBuf) -> PyResult<PathBuf> {
        report::write_cohort(&dir, &self.vocabulary, &self.procedures).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.procedures.len()
    }

    #[getter]
    fn procedure_ids(&self) -> Vec<String> {
        self.procedures.iter().map(|p| p.procedure_id.clone()).collect()
    }

    #[getter]
    fn vocabulary_fingerprint(&self) -> String {
        self.vocabulary.fingerprint()
    }

    /// Symbol names for an activity.
    fn names(&self, a: Codes) -> PyResult<(String, String, String)> {
        let [v, i, t] = self.vocabulary.names(activity(a)).map_err(err)?;
        Ok((v.to_string(), i.to_string(), t.to_string()))
    }

    /// `[(labels, event_mask), ...]` on the grid of `rate`.
    fn sample(&self, rate: &Bound<'_, PyAny>) -> PyResult<Vec<(Vec<Codes>, Vec<bool>)>> {
        let seqs = self.sampled(rate_of(rate)?)?;
        Ok(seqs
            .into_iter()
            .map(|s| (s.labels.into_iter().map(codes).collect(), s.event_mask))
            .collect())
    }

    /// Aligns the whole cohort and derives its standard process.
    fn align<'py>(&self, py: Python<'py>, rate: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyDict>> {
        let seqs = self.sampled(rate_of(rate)?)?;
        let (cohort, standard) = py
            .detach(|| {
                let cohort = align::align_cohort(&seqs, &AlignConfig::default(), None)?;
                let standard = standard_process(&cohort.aligned)?;
                Ok((cohort, standard))
            })
            .map_err(err)?;
        let d = PyDict::new(py);
        d.set_item(
            "standard",
            standard.labels.iter().copied().map(codes).collect::<Vec<_>>(),
        )?;
        d.set_item("support", standard.support)?;
        d.set_item("widths", cohort.widths.as_slice().to_vec())?;
        d.set_item(
            "aligned",
            cohort
                .aligned
                .iter()
                .map(|a| a.labels.iter().copied().map(codes).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        )?;
        d.set_item("dba_costs", cohort.dba_trace)?;
        Ok(d)
    }

    /// Per-instant state shares (ND, CD, ED) over the aligned cohort.
    fn state_mix(&self, rate: &Bound<'_, PyAny>) -> PyResult<(f64, f64, f64)> {
        let seqs = self.sampled(rate_of(rate)?)?;
        let [nd, cd, ed] = eval::cohort_state_mix(&seqs, &AlignConfig::default()).map_err(err)?;
        Ok((nd, cd, ed))
    }

    /// Leave-one-out evaluation at one rate: means and 95% intervals.
    #[pyo3(signature = (rate, smoothing = 1.0, d_max_factor = 1.5, decode = "viterbi"))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        rate: &Bound<'py, PyAny>,
        smoothing: f64,
        d_max_factor: f64,
        decode: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let rate = rate_of(rate)?;
        let decode = match decode {
            "viterbi" => DecodeMode::Viterbi,
            "posterior" => DecodeMode::Posterior,
            other => return Err(PyValueError::new_err(format!("unknown decode mode {other:?}"))),
        };
        let config = EvalConfig {
            align: AlignConfig::default(),
            classifier: ClassifierConfig {
                d_max_factor,
                smoothing,
                em: None,
                decode,
            },
        };
        let outcomes = py
            .detach(|| eval::loocv(&self.procedures, rate, &config))
            .map_err(err)?;
        let s = eval::summarize(rate, &outcomes);
        let d = PyDict::new(py);
        d.set_item("rate", s.rate.to_string())?;
        d.set_item("folds", s.folds)?;
        d.set_item("accuracy", summary_dict(py, &s.accuracy)?)?;
        for (i, name) in ["ND", "CD", "ED"].into_iter().enumerate() {
            d.set_item(format!("recall_{name}"), summary_dict(py, &s.recall[i])?)?;
            d.set_item(format!("precision_{name}"), summary_dict(py, &s.precision[i])?)?;
        }
        d.set_item("state_mix", s.state_mix.to_vec())?;
        let e = PyDict::new(py);
        e.set_item("untrained", s.errors.untrained)?;
        e.set_item("rarely_wrong", s.errors.rarely_wrong)?;
        e.set_item("correctly_trained", s.errors.correctly_trained)?;
        e.set_item("other", s.errors.other)?;
        d.set_item("errors", e)?;
        Ok(d)
    }
}

#[pymodule]
fn procdev_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(dtw, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_trend, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_rates, m)?)?;
    m.add_class::<PyHsmm>()?;
    m.add_class::<PyCohort>()?;
    m.add("BONFERRONI_ALPHA", eval::BONFERRONI_ALPHA)?;
    Ok(())
}
