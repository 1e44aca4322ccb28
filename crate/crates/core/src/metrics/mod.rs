//! Quality and latency measurement.

mod bleu;
mod edit;
mod lagging;

pub use bleu::{corpus_bleu, corpus_bleu_with, tokenize_13a, BleuScore, Smoothing, MAX_NGRAM_ORDER};
pub use edit::{levenshtein, normalized_edit_distance};
pub use lagging::{average_lagging, delays_from_log, DelaySequence, LatencyMode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{Event, RunLog};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid delay sequence: {0}")]
    InvalidDelays(String),
    #[error("run log has no StreamEnded event")]
    IncompleteLog,
}

/// Aggregate metrics over a set of completed runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub bleu: f64,
    /// Mean source-time Average Lagging over utterances, seconds.
    pub al: f64,
    /// Mean computation-aware Average Lagging over utterances, seconds.
    pub al_ca: f64,
    pub segments: usize,
    pub tokens: usize,
}

/// Spoken transcript reconstructed from the log's emissions.
pub fn transcript_text(log: &RunLog) -> String {
    crate::transcript::join_segments(log.events().iter().filter_map(|e| match &e.event {
        Event::Emission { text, .. } => Some(text.as_str()),
        _ => None,
    }))
}

/// Corpus BLEU plus per-utterance AL / AL_CA averaged arithmetically.
pub fn evaluate_logs(logs: &[RunLog], references: &[impl AsRef<str>]) -> Result<MetricsReport, MetricsError> {
    if logs.len() != references.len() {
        return Err(MetricsError::LengthMismatch { hypotheses: logs.len(), references: references.len() });
    }
    if logs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let hyps: Vec<String> = logs.iter().map(transcript_text).collect();
    let bleu = corpus_bleu(&hyps, references)?.score;
    let mut al = 0.0;
    let mut al_ca = 0.0;
    let mut segments = 0;
    let mut tokens = 0;
    for (log, reference) in logs.iter().zip(references) {
        let src = delays_from_log(log, LatencyMode::SourceTime, reference.as_ref())?;
        let ca = delays_from_log(log, LatencyMode::ComputationAware, reference.as_ref())?;
        al += average_lagging(&src);
        al_ca += average_lagging(&ca);
        tokens += src.delays().len();
        segments += log.emission_count();
    }
    let n = logs.len() as f64;
    Ok(MetricsReport { bleu, al: al / n, al_ca: al_ca / n, segments, tokens })
}
