//! Python bindings: metrics, policies, trace replay and reporting.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use s2st_core::audio::{read_wav, AudioSource};
use s2st_core::backends::{trace_load, BackendError, MockSynthesizer};
use s2st_core::harness::{self, ReportFormat};
use s2st_core::metrics::{self, DelaySequence, Smoothing};
use s2st_core::pipeline::{self, PipelineConfig, PipelineError, RunLog};
use s2st_core::policies;

create_exception!(s2st, TraceDivergenceError, PyRuntimeError, "Replay diverged from the recorded trace.");

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn backend_error(e: BackendError) -> PyErr {
    match e {
        BackendError::TraceDivergence { .. } => TraceDivergenceError::new_err(e.to_string()),
        BackendError::Io(_) => PyOSError::new_err(e.to_string()),
        BackendError::MalformedTrace { .. } | BackendError::InvalidRequest(_) | BackendError::Config(_) => {
            value_error(e)
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Character-level edit distance.
#[pyfunction]
fn levenshtein(a: &str, b: &str) -> usize {
    metrics::levenshtein(a, b)
}

/// Edit distance divided by the longer length; 0.0 for two empty strings.
#[pyfunction]
fn normalized_edit_distance(a: &str, b: &str) -> f64 {
    metrics::normalized_edit_distance(a, b)
}

#[pyfunction]
fn tokenize_13a(line: &str) -> String {
    metrics::tokenize_13a(line)
}

#[pyclass(frozen, get_all, name = "BleuScore")]
struct PyBleuScore {
    score: f64,
    precisions: Vec<f64>,
    brevity_penalty: f64,
    hyp_len: usize,
    ref_len: usize,
}

#[pymethods]
impl PyBleuScore {
    fn __repr__(&self) -> String {
        format!("BleuScore(score={:.4}, brevity_penalty={:.4})", self.score, self.brevity_penalty)
    }
}

/// Corpus BLEU-4 in [0, 100]; `smoothing` is "none" or "exp".
#[pyfunction]
#[pyo3(signature = (hypotheses, references, smoothing = "none"))]
fn corpus_bleu(hypotheses: Vec<String>, references: Vec<String>, smoothing: &str) -> PyResult<PyBleuScore> {
    let smoothing = match smoothing {
        "none" => Smoothing::None,
        "exp" => Smoothing::Exp,
        other => return Err(value_error(format!("unknown smoothing {other:?}"))),
    };
    let s = metrics::corpus_bleu_with(&hypotheses, &references, smoothing).map_err(value_error)?;
    Ok(PyBleuScore {
        score: s.score,
        precisions: s.ngram_precisions.to_vec(),
        brevity_penalty: s.brevity_penalty,
        hyp_len: s.hyp_len,
        ref_len: s.ref_len,
    })
}

/// Average Lagging of per-token delays against a source of `source_duration`
/// seconds and a reference of `reference_token_count` tokens.
#[pyfunction]
fn average_lagging(delays: Vec<f64>, source_duration: f64, reference_token_count: usize) -> PyResult<f64> {
    let seq = DelaySequence::new(delays, source_duration, reference_token_count).map_err(value_error)?;
    Ok(metrics::average_lagging(&seq))
}

#[pyclass(frozen, get_all, name = "Hypothesis", from_py_object)]
#[derive(Clone)]
struct PyHypothesis {
    text: String,
    no_speech_prob: f64,
    avg_logprob: f64,
}

#[pymethods]
impl PyHypothesis {
    #[new]
    #[pyo3(signature = (text, no_speech_prob = 0.0, avg_logprob = 0.0))]
    fn new(text: String, no_speech_prob: f64, avg_logprob: f64) -> PyResult<Self> {
        if !(0.0..=1.0).contains(&no_speech_prob) {
            return Err(value_error("no_speech_prob must be in [0, 1]"));
        }
        Ok(Self { text, no_speech_prob, avg_logprob })
    }

    #[getter]
    fn confidence(&self) -> f64 {
        1.0 - self.no_speech_prob
    }

    fn __repr__(&self) -> String {
        format!("Hypothesis({:?}, no_speech_prob={})", self.text, self.no_speech_prob)
    }
}

impl PyHypothesis {
    fn to_core(&self) -> s2st_core::Hypothesis {
        s2st_core::Hypothesis {
            avg_logprob: self.avg_logprob,
            ..s2st_core::Hypothesis::new(&self.text, self.no_speech_prob)
        }
    }
}

/// A speak/wait policy: "greedy", "offline", "cap:<gamma>" or "cp:<alpha>".
#[pyclass(frozen, name = "Policy")]
struct PyPolicy {
    inner: policies::PolicyConfig,
}

#[pymethods]
impl PyPolicy {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Self { inner: spec.parse().map_err(value_error)? })
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label()
    }

    #[getter]
    fn slug(&self) -> String {
        self.inner.slug()
    }

    /// Returns `(speak, reason)` for the current hypothesis.
    #[pyo3(signature = (current, previous = None, buffer_duration = 0.0, end_of_stream = false))]
    fn decide(
        &self,
        current: PyHypothesis,
        previous: Option<PyHypothesis>,
        buffer_duration: f64,
        end_of_stream: bool,
    ) -> (bool, String) {
        let current = current.to_core();
        let previous = previous.map(|p| p.to_core());
        let d = policies::decide(
            &self.inner,
            &policies::PolicyInput { current: &current, previous: previous.as_ref(), buffer_duration, end_of_stream },
        );
        (d.is_speak(), d.reason)
    }

    fn __repr__(&self) -> String {
        format!("Policy({:?})", self.inner.slug())
    }
}

#[pyclass(frozen, get_all, name = "RunResult")]
struct PyRunResult {
    transcript: String,
    /// `(emitted_at, text, source_consumed)` per spoken segment.
    emissions: Vec<(f64, String, f64)>,
    runlog: String,
}

#[pymethods]
impl PyRunResult {
    /// BLEU / AL / AL_CA of this run against one reference.
    fn metrics(&self, reference: String) -> PyResult<(f64, f64, f64)> {
        let log = RunLog::parse_jsonl(self.runlog.as_bytes()).map_err(value_error)?;
        let r = metrics::evaluate_logs(&[log], &[reference]).map_err(value_error)?;
        Ok((r.bleu, r.al, r.al_ca))
    }
}

/// Replays a trace file through the streaming loop on the simulated clock.
/// `audio` is a WAV path or a duration of silence in seconds.
#[pyfunction]
#[pyo3(signature = (audio, trace_path, window_seconds, policy, language = "", tts_rate = 0.06))]
fn replay_trace(
    audio: &Bound<'_, PyAny>,
    trace_path: PathBuf,
    window_seconds: f64,
    policy: &PyPolicy,
    language: &str,
    tts_rate: f64,
) -> PyResult<PyRunResult> {
    let source = if let Ok(seconds) = audio.extract::<f64>() {
        AudioSource::silence(seconds)
    } else {
        let path: PathBuf = audio.extract()?;
        read_wav(&path).map_err(|e| PyOSError::new_err(e.to_string()))?
    };
    let mut backend = trace_load(&trace_path).map_err(backend_error)?;
    let config = PipelineConfig::simulated(window_seconds, policy.inner).with_language(language);
    let output =
        pipeline::run(&source, &config, &mut backend, &mut MockSynthesizer::new(tts_rate)).map_err(|f| {
            match f.error {
                PipelineError::Backend(e) => backend_error(e),
                other => value_error(other),
            }
        })?;
    Ok(PyRunResult {
        transcript: output.transcript.full_text(),
        emissions: output.log.emissions().map(|(at, text, consumed)| (at, text.to_string(), consumed)).collect(),
        runlog: output.log.to_jsonl(),
    })
}

/// Aggregate metrics over run logs given as JSON-lines text.
#[pyfunction]
fn evaluate_runlogs(runlogs: Vec<String>, references: Vec<String>) -> PyResult<(f64, f64, f64, usize, usize)> {
    let logs = runlogs
        .iter()
        .map(|t| RunLog::parse_jsonl(t.as_bytes()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(value_error)?;
    let r = metrics::evaluate_logs(&logs, &references).map_err(value_error)?;
    Ok((r.bleu, r.al, r.al_ca, r.segments, r.tokens))
}

#[pyclass(frozen, get_all, name = "ManifestEntry")]
struct PyManifestEntry {
    id: String,
    audio_path: PathBuf,
    duration: f64,
    source_text: String,
    reference_translation: String,
    language: String,
}

#[pymethods]
impl PyManifestEntry {
    fn __repr__(&self) -> String {
        format!("ManifestEntry({:?}, duration={})", self.id, self.duration)
    }
}

/// Loads a TSV manifest, drops rows without audio, and applies the seeded
/// duration filter and sample limit.
#[pyfunction]
#[pyo3(signature = (path, audio_root = None, min_duration = 6.0, limit = 75, seed = 0))]
fn load_manifest(
    path: PathBuf,
    audio_root: Option<PathBuf>,
    min_duration: f64,
    limit: usize,
    seed: u64,
) -> PyResult<Vec<PyManifestEntry>> {
    let loaded = harness::load_manifest(&path, audio_root.as_deref()).map_err(value_error)?;
    Ok(harness::filter_entries(&loaded.entries, min_duration, limit, seed)
        .into_iter()
        .map(|e| PyManifestEntry {
            id: e.id,
            audio_path: e.audio_path,
            duration: e.duration,
            source_text: e.source_text,
            reference_translation: e.reference_translation,
            language: e.language,
        })
        .collect())
}

#[pyclass(name = "ReportRow", from_py_object)]
#[derive(Clone)]
struct PyReportRow {
    inner: harness::ReportRow,
}

#[pymethods]
impl PyReportRow {
    #[new]
    #[pyo3(signature = (policy_label, window_seconds, bleu = None, al_seconds = None, al_ca_seconds = None, n_examples = 0, failures = 0))]
    fn new(
        policy_label: String,
        window_seconds: f64,
        bleu: Option<f64>,
        al_seconds: Option<f64>,
        al_ca_seconds: Option<f64>,
        n_examples: usize,
        failures: usize,
    ) -> Self {
        Self {
            inner: harness::ReportRow {
                policy_label,
                window_seconds,
                bleu,
                al_seconds,
                al_ca_seconds,
                n_examples,
                failures,
            },
        }
    }
}

/// Renders rows as "csv" or "markdown".
#[pyfunction]
#[pyo3(signature = (rows, format = "markdown"))]
fn emit_report(rows: Vec<PyReportRow>, format: &str) -> PyResult<String> {
    let format: ReportFormat = format.parse().map_err(value_error)?;
    let rows: Vec<harness::ReportRow> = rows.into_iter().map(|r| r.inner).collect();
    Ok(harness::emit_report(&rows, format))
}

#[pymodule]
fn s2st(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(levenshtein, m)?)?;
    m.add_function(wrap_pyfunction!(normalized_edit_distance, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize_13a, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_bleu, m)?)?;
    m.add_function(wrap_pyfunction!(average_lagging, m)?)?;
    m.add_function(wrap_pyfunction!(replay_trace, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_runlogs, m)?)?;
    m.add_function(wrap_pyfunction!(load_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(emit_report, m)?)?;
    m.add_class::<PyBleuScore>()?;
    m.add_class::<PyHypothesis>()?;
    m.add_class::<PyPolicy>()?;
    m.add_class::<PyRunResult>()?;
    m.add_class::<PyManifestEntry>()?;
    m.add_class::<PyReportRow>()?;
    m.add("TraceDivergenceError", m.py().get_type::<TraceDivergenceError>())?;
    Ok(())
}
