#![allow(dead_code)]

use std::path::Path;

use s2st_core::audio::{write_wav, AudioSource};
use s2st_core::backends::{BackendError, SpeechTranslator, TraceBackend, TraceEntry, TranslationRequest};
use s2st_core::harness::ManifestEntry;
use s2st_core::pipeline::{Event, RunLog};
use s2st_core::Hypothesis;

pub fn entry(i: usize, buffer: f64, prior: &str, text: &str, nsp: f64, compute: f64) -> TraceEntry {
    TraceEntry {
        query_index: i,
        expected_buffer_seconds: buffer,
        expected_prior_text: prior.into(),
        text: text.into(),
        avg_logprob: -0.3,
        no_speech_prob: nsp,
        compute_seconds: compute,
    }
}

pub fn trace(entries: Vec<TraceEntry>) -> TraceBackend {
    TraceBackend::new(entries)
}

/// Backend computing each hypothesis from the request with a closure.
pub struct FnTranslator<F>(pub F);

impl<F: FnMut(&TranslationRequest) -> Hypothesis> SpeechTranslator for FnTranslator<F> {
    fn translate(&mut self, request: &TranslationRequest) -> Result<Hypothesis, BackendError> {
        Ok((self.0)(request))
    }
}

/// Deterministic stand-in for an offline model: reveals the reference words
/// in proportion to the source heard so far, continuing after the committed
/// prefix. Mid-stream the newest word is garbled and confidence grows with the
/// buffer length.
#[derive(Debug, Clone)]
pub struct SyntheticModel {
    pub words: Vec<String>,
    pub total_seconds: f64,
}

impl SyntheticModel {
    pub fn new(reference: &str, total_seconds: f64) -> Self {
        Self { words: reference.split_whitespace().map(str::to_string).collect(), total_seconds }
    }
}

impl SpeechTranslator for SyntheticModel {
    fn translate(&mut self, request: &TranslationRequest) -> Result<Hypothesis, BackendError> {
        let end = request.audio.last().map_or(0.0, |c| c.end_offset());
        let at_end = end >= self.total_seconds - 1e-6;
        let n = self.words.len();
        let visible = if at_end { n } else { ((end / self.total_seconds) * n as f64).floor() as usize };
        let committed = request.prior_text.split_whitespace().count().min(n);
        let mut out: Vec<String> = self.words[committed.min(visible)..visible].to_vec();
        if !at_end {
            if let Some(last) = out.last_mut() {
                *last = format!("{}?", last.to_uppercase());
            }
        }
        let buffer = request.buffer_seconds();
        let no_speech_prob = if buffer < 1.5 {
            0.6
        } else if buffer < 3.0 {
            0.3
        } else {
            0.05
        };
        Ok(Hypothesis {
            text: out.join(" "),
            avg_logprob: -0.2,
            no_speech_prob,
            language: request.source_language.clone(),
            compute_seconds: 0.1 + 0.02 * buffer,
        })
    }
}

pub const SYNTHETIC_REFERENCES: [(&str, f64); 5] = [
    ("the committee approved the new budget after a long debate", 6.3),
    ("my sister moved to the coast last summer with her two dogs", 7.1),
    ("please remember to close the windows before the storm arrives tonight", 8.0),
    ("the museum will be closed on monday for maintenance work", 6.6),
    ("we walked along the river until the sun went down behind the hills", 9.2),
];

/// Writes silent WAVs and returns manifest entries for the synthetic corpus.
pub fn synthetic_corpus(dir: &Path) -> Vec<ManifestEntry> {
    SYNTHETIC_REFERENCES
        .iter()
        .enumerate()
        .map(|(i, (reference, seconds))| {
            let path = dir.join(format!("utt{i}.wav"));
            write_wav(&path, &AudioSource::silence(*seconds)).unwrap();
            ManifestEntry {
                id: format!("utt{i}"),
                audio_path: path,
                duration: *seconds,
                source_text: String::new(),
                reference_translation: reference.to_string(),
                language: "es".into(),
            }
        })
        .collect()
}

/// Checks that every query sees exactly the audio received since the previous
/// emission and that emissions account for the source they consumed.
pub fn check_conservation(log: &RunLog) -> Result<(), String> {
    let mut since_emission = 0.0;
    let mut consumed = 0.0;
    let mut last_query_buffer = 0.0;
    let mut received = 0.0;
    for e in log.events() {
        match &e.event {
            Event::ChunkReceived { duration, .. } => {
                since_emission += duration;
                received += duration;
            }
            Event::QueryStarted { buffer_seconds, .. } => {
                if (buffer_seconds - since_emission).abs() > 1e-5 {
                    return Err(format!("query buffer {buffer_seconds} but {since_emission} received since emission"));
                }
                last_query_buffer = *buffer_seconds;
            }
            Event::Emission { source_consumed, .. } => {
                if (source_consumed - (consumed + last_query_buffer)).abs() > 1e-5 {
                    return Err(format!(
                        "emission consumed {source_consumed}, expected {}",
                        consumed + last_query_buffer
                    ));
                }
                consumed = *source_consumed;
                since_emission = 0.0;
            }
            Event::StreamEnded { total_source_seconds } => {
                if (total_source_seconds - received).abs() > 1e-5 {
                    return Err(format!("total {total_source_seconds} but received {received}"));
                }
                let flushed = total_source_seconds - consumed;
                if (consumed + flushed - total_source_seconds).abs() > 1e-9 || flushed < -1e-6 {
                    return Err("consumed source exceeds total".into());
                }
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn first_emission_time(log: &RunLog) -> Option<f64> {
    log.emissions().next().map(|(at, _, _)| at)
}
