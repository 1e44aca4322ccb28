//! Speech-translation and speech-synthesis backends.
//!
//! The pipeline talks to both models through the [`SpeechTranslator`] and
//! [`SpeechSynthesizer`] traits. Implementations here are a deterministic trace
//! replayer, a line-delimited JSON client for an external model process, a mock
//! synthesizer, and a remote HTTP synthesizer.

mod process;
mod trace;
mod tts;

pub use process::{PendingResponse, ProcessClient, ProcessSynthesizer, ProcessTranslator, WireRequest, WireResponse};
pub use trace::{read_trace, trace_load, write_trace, RecordingTranslator, TraceBackend, TraceEntry};
pub use tts::{MockSynthesizer, RemoteSynthesizer, RemoteTtsConfig, DEFAULT_TTS_API_KEY_ENV};

use thiserror::Error;

use crate::audio::{concat_samples, AudioChunk};
use crate::transcript::Hypothesis;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error: {message}")]
    Transport { message: String, retriable: bool },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("backend reported error for request {id}: {message}")]
    Remote { id: i64, message: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed trace (line {line}): {message}")]
    MalformedTrace { line: usize, message: String },
    #[error("trace exhausted after {served} queries")]
    TraceExhausted { served: usize },
    #[error("trace divergence at query {query_index}: {message}")]
    TraceDivergence { query_index: usize, message: String },
    #[error("backend configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BackendError {
    pub fn transport(message: impl Into<String>) -> Self {
        BackendError::Transport { message: message.into(), retriable: true }
    }

    pub fn is_retriable(&self) -> bool {
        matches!(self, BackendError::Transport { retriable: true, .. })
    }
}

/// One query to the speech-translation model: the frame buffer plus the
/// committed transcript as decoding context.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationRequest {
    pub audio: Vec<AudioChunk>,
    pub prior_text: String,
    pub source_language: String,
    pub request_id: u64,
}

impl TranslationRequest {
    pub fn buffer_seconds(&self) -> f64 {
        self.audio.iter().map(AudioChunk::duration).sum()
    }

    pub fn samples(&self) -> Vec<f32> {
        concat_samples(&self.audio)
    }

    pub(crate) fn validate(&self) -> Result<(), BackendError> {
        if self.audio.is_empty() {
            return Err(BackendError::InvalidRequest("translation request has no audio".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeechRequest {
    pub text: String,
    pub request_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeechResult {
    pub audio_duration: f64,
    pub compute_seconds: f64,
}

pub trait SpeechTranslator {
    fn translate(&mut self, request: &TranslationRequest) -> Result<Hypothesis, BackendError>;
}

pub trait SpeechSynthesizer {
    fn speak(&mut self, request: &SpeechRequest) -> Result<SpeechResult, BackendError>;
}

impl<T: SpeechTranslator + ?Sized> SpeechTranslator for Box<T> {
    fn translate(&mut self, request: &TranslationRequest) -> Result<Hypothesis, BackendError> {
        (**self).translate(request)
    }
}

impl<T: SpeechSynthesizer + ?Sized> SpeechSynthesizer for Box<T> {
    fn speak(&mut self, request: &SpeechRequest) -> Result<SpeechResult, BackendError> {
        (**self).speak(request)
    }
}
