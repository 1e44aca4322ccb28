//! Backend hypotheses and the committed (spoken) transcript.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One candidate translation returned by the speech-translation backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub text: String,
    pub avg_logprob: f64,
    pub no_speech_prob: f64,
    #[serde(default)]
    pub language: String,
    pub compute_seconds: f64,
}

impl Hypothesis {
    pub fn new(text: impl Into<String>, no_speech_prob: f64) -> Self {
        Self { text: text.into(), avg_logprob: 0.0, no_speech_prob, language: String::new(), compute_seconds: 0.0 }
    }

    pub fn with_compute_seconds(mut self, seconds: f64) -> Self {
        self.compute_seconds = seconds;
        self
    }

    /// Model confidence used by the confidence-aware policy.
    pub fn confidence(&self) -> f64 {
        1.0 - self.no_speech_prob
    }

    pub fn is_blank(&self) -> bool {
        self.text.trim().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub text: String,
    /// Wall (or simulated) seconds since stream start at commit time.
    pub emitted_at: f64,
    /// Source seconds consumed when this segment was committed.
    pub source_consumed: f64,
    /// Length of synthesized audio; 0 when synthesis failed or was skipped.
    pub speech_duration: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum TranscriptError {
    #[error("segment emitted at {at:.6}s precedes previous emission at {previous:.6}s")]
    NonMonotonicEmission { previous: f64, at: f64 },
    #[error("segment consumes {consumed:.6}s of source, less than previous {previous:.6}s")]
    NonMonotonicSource { previous: f64, consumed: f64 },
    #[error("segment text is empty")]
    EmptySegment,
}

/// Append-only sequence of spoken segments.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    segments: Vec<TranscriptSegment>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn segments(&self) -> &[TranscriptSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn commit(&mut self, segment: TranscriptSegment) -> Result<(), TranscriptError> {
        if segment.text.trim().is_empty() {
            return Err(TranscriptError::EmptySegment);
        }
        if let Some(last) = self.segments.last() {
            if segment.emitted_at < last.emitted_at {
                return Err(TranscriptError::NonMonotonicEmission {
                    previous: last.emitted_at,
                    at: segment.emitted_at,
                });
            }
            if segment.source_consumed < last.source_consumed {
                return Err(TranscriptError::NonMonotonicSource {
                    previous: last.source_consumed,
                    consumed: segment.source_consumed,
                });
            }
        }
        self.segments.push(segment);
        Ok(())
    }

    /// Segment texts joined by single spaces, trimmed.
    pub fn full_text(&self) -> String {
        join_segments(self.segments.iter().map(|s| s.text.as_str()))
    }

    pub(crate) fn set_speech_duration(&mut self, index: usize, seconds: f64) {
        if let Some(seg) = self.segments.get_mut(index) {
            seg.speech_duration = seconds;
        }
    }
}

pub(crate) fn join_segments<'a>(texts: impl Iterator<Item = &'a str>) -> String {
    let parts: Vec<&str> = texts.map(str::trim).filter(|t| !t.is_empty()).collect();
    parts.join(" ")
}

/// Trims and collapses internal whitespace runs to single spaces.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
