use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, SpeechTranslator, TranslationRequest};
use crate::transcript::{normalize_whitespace, Hypothesis};

/// Buffer-length tolerance when validating a replayed query against its recording.
pub const BUFFER_TOLERANCE_SECONDS: f64 = 0.05;

/// One recorded backend response plus the inputs it was recorded under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub query_index: usize,
    pub expected_buffer_seconds: f64,
    pub expected_prior_text: String,
    pub text: String,
    pub avg_logprob: f64,
    pub no_speech_prob: f64,
    pub compute_seconds: f64,
}

/// Parses trace lines. Blank lines and lines starting with `#` are ignored.
pub fn read_trace(reader: impl BufRead) -> Result<Vec<TraceEntry>, BackendError> {
    let mut entries = Vec::new();
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let entry: TraceEntry = serde_json::from_str(trimmed)
            .map_err(|e| BackendError::MalformedTrace { line: i + 1, message: e.to_string() })?;
        if !(0.0..=1.0).contains(&entry.no_speech_prob) || !(entry.compute_seconds >= 0.0) {
            return Err(BackendError::MalformedTrace {
                line: i + 1,
                message: "no_speech_prob must be in [0,1] and compute_seconds >= 0".into(),
            });
        }
        entries.push(entry);
        lines.push(i + 1);
    }
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by_key(|&i| entries[i].query_index);
    for (expected, &i) in order.iter().enumerate() {
        if entries[i].query_index != expected {
            return Err(BackendError::MalformedTrace {
                line: lines[i],
                message: format!("query_index {} where {expected} was expected", entries[i].query_index),
            });
        }
    }
    order.into_iter().map(|i| Ok(entries[i].clone())).collect()
}

pub fn write_trace(path: impl AsRef<Path>, entries: &[TraceEntry], comment: Option<&str>) -> Result<(), BackendError> {
    let mut out = BufWriter::new(File::create(path)?);
    if let Some(comment) = comment {
        for line in comment.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    for entry in entries {
        serde_json::to_writer(&mut out, entry).map_err(|e| BackendError::Protocol(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Loads a trace file into a replaying backend.
pub fn trace_load(path: impl AsRef<Path>) -> Result<TraceBackend, BackendError> {
    let file = File::open(path)?;
    Ok(TraceBackend::new(read_trace(BufReader::new(file))?))
}

/// Replays recorded hypotheses in `query_index` order, failing loudly when the
/// pipeline's request does not match what was recorded.
#[derive(Debug, Clone)]
pub struct TraceBackend {
    entries: Vec<TraceEntry>,
    next: usize,
    sleep_for_compute: bool,
}

impl TraceBackend {
    /// `entries` must already be in contiguous `query_index` order.
    pub fn new(entries: Vec<TraceEntry>) -> Self {
        Self { entries, next: 0, sleep_for_compute: false }
    }

    /// Sleep for each entry's recorded compute time, for wall-clock replays.
    pub fn sleep_for_compute(mut self, enabled: bool) -> Self {
        self.sleep_for_compute = enabled;
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn served(&self) -> usize {
        self.next
    }
}

impl SpeechTranslator for TraceBackend {
    fn translate(&mut self, request: &TranslationRequest) -> Result<Hypothesis, BackendError> {
        request.validate()?;
        let entry = self.entries.get(self.next).ok_or(BackendError::TraceExhausted { served: self.next })?;
        let buffer = request.buffer_seconds();
        if (buffer - entry.expected_buffer_seconds).abs() > BUFFER_TOLERANCE_SECONDS {
            return Err(BackendError::TraceDivergence {
                query_index: entry.query_index,
                message: format!("buffer is {buffer:.3}s but trace expects {:.3}s", entry.expected_buffer_seconds),
            });
        }
        if normalize_whitespace(&request.prior_text) != normalize_whitespace(&entry.expected_prior_text) {
            return Err(BackendError::TraceDivergence {
                query_index: entry.query_index,
                message: format!(
                    "prior text {:?} but trace expects {:?}",
                    request.prior_text, entry.expected_prior_text
                ),
            });
        }
        if self.sleep_for_compute && entry.compute_seconds > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(entry.compute_seconds));
        }
        self.next += 1;
        Ok(Hypothesis {
            text: entry.text.clone(),
            avg_logprob: entry.avg_logprob,
            no_speech_prob: entry.no_speech_prob,
            language: request.source_language.clone(),
            compute_seconds: entry.compute_seconds,
        })
    }
}

/// Wraps a live backend and records every query as a [`TraceEntry`].
#[derive(Debug)]
pub struct RecordingTranslator<T> {
    inner: T,
    entries: Vec<TraceEntry>,
}

impl<T> RecordingTranslator<T> {
    pub fn new(inner: T) -> Self {
        Self { inner, entries: Vec::new() }
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn into_parts(self) -> (T, Vec<TraceEntry>) {
        (self.inner, self.entries)
    }
}

impl<T: SpeechTranslator> SpeechTranslator for RecordingTranslator<T> {
    fn translate(&mut self, request: &TranslationRequest) -> Result<Hypothesis, BackendError> {
        let hyp = self.inner.translate(request)?;
        self.entries.push(TraceEntry {
            query_index: self.entries.len(),
            expected_buffer_seconds: request.buffer_seconds(),
            expected_prior_text: request.prior_text.clone(),
            text: hyp.text.clone(),
            avg_logprob: hyp.avg_logprob,
            no_speech_prob: hyp.no_speech_prob,
            compute_seconds: hyp.compute_seconds,
        });
        Ok(hyp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::AudioChunk;

    fn entry(i: usize, buffer: f64, prior: &str, text: &str) -> String {
        serde_json::to_string(&TraceEntry {
            query_index: i,
            expected_buffer_seconds: buffer,
            expected_prior_text: prior.into(),
            text: text.into(),
            avg_logprob: -0.3,
            no_speech_prob: 0.1,
            compute_seconds: 0.2,
        })
        .unwrap()
    }

    fn request(seconds: f64, prior: &str, id: u64) -> TranslationRequest {
        let n = (seconds * 16_000.0) as usize;
        TranslationRequest {
            audio: vec![AudioChunk::new(vec![0.0f32; n], 16_000, 0.0).unwrap()],
            prior_text: prior.into(),
            source_language: "es".into(),
            request_id: id,
        }
    }

    #[test]
    fn serves_entries_in_order() {
        let text = [entry(0, 1.0, "", "a"), entry(1, 2.0, "", "b"), entry(2, 1.0, "b", "c")].join("\n");
        let mut backend = TraceBackend::new(read_trace(text.as_bytes()).unwrap());
        assert_eq!(backend.len(), 3);
        assert_eq!(backend.translate(&request(1.0, "", 0)).unwrap().text, "a");
        assert_eq!(backend.translate(&request(2.0, "", 1)).unwrap().text, "b");
        let c = backend.translate(&request(1.0, "  b ", 2)).unwrap();
        assert_eq!(c.text, "c");
        assert_eq!(c.language, "es");
        assert!(matches!(backend.translate(&request(1.0, "", 3)), Err(BackendError::TraceExhausted { served: 3 })));
    }

    #[test]
    fn gap_in_indices_is_malformed() {
        let text = [entry(0, 1.0, "", "a"), entry(2, 1.0, "", "b")].join("\n");
        assert!(matches!(read_trace(text.as_bytes()), Err(BackendError::MalformedTrace { line: 2, .. })));
        let dup = [entry(0, 1.0, "", "a"), entry(0, 1.0, "", "b")].join("\n");
        assert!(matches!(read_trace(dup.as_bytes()), Err(BackendError::MalformedTrace { .. })));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = format!("# decoding: defaults\n\n{}\n", entry(0, 1.0, "", "a"));
        assert_eq!(read_trace(text.as_bytes()).unwrap().len(), 1);
    }

    #[test]
    fn empty_trace_fails_on_first_query() {
        let mut backend = TraceBackend::new(read_trace("".as_bytes()).unwrap());
        assert!(matches!(backend.translate(&request(1.0, "", 0)), Err(BackendError::TraceExhausted { served: 0 })));
    }

    #[test]
    fn divergence_is_detected() {
        let text = entry(0, 2.0, "hola", "x");
        let mut backend = TraceBackend::new(read_trace(text.as_bytes()).unwrap());
        assert!(matches!(backend.translate(&request(1.0, "hola", 0)), Err(BackendError::TraceDivergence { .. })));
        assert!(matches!(backend.translate(&request(2.0, "hello", 0)), Err(BackendError::TraceDivergence { .. })));
        assert!(backend.translate(&request(2.04, "hola", 0)).is_ok());
    }

    #[test]
    fn malformed_json_reports_line() {
        let text = format!("{}\n{{not json", entry(0, 1.0, "", "a"));
        assert!(matches!(read_trace(text.as_bytes()), Err(BackendError::MalformedTrace { line: 2, .. })));
    }

    #[test]
    fn recording_round_trips_through_a_file() {
        let source = [entry(0, 1.0, "", "a"), entry(1, 1.0, "a", "b")].join("\n");
        let mut rec = RecordingTranslator::new(TraceBackend::new(read_trace(source.as_bytes()).unwrap()));
        rec.translate(&request(1.0, "", 0)).unwrap();
        rec.translate(&request(1.0, "a", 1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trace.jsonl");
        write_trace(&path, rec.entries(), Some("recorded in test")).unwrap();
        let loaded = trace_load(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(read_trace(source.as_bytes()).unwrap(), rec.entries());
    }
}
