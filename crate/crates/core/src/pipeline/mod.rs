//! The streaming translate/decide/speak loop.
//!
//! Three workers cooperate over channels:
//!
//! * the pacer slices the source into windows and releases each chunk once its
//!   audio would have been recorded (or immediately when unpaced);
//! * the translator owns the frame buffer and transcript: it drains every chunk
//!   that has arrived, issues one backend query over the whole buffer with the
//!   committed transcript as context, and applies the policy;
//! * the speaker synthesizes committed segments in order, concurrently with
//!   the next translation query.
//!
//! With the simulated clock the translator's time advances to
//! `max(next chunk boundary, now + compute_seconds)`, so a replayed trace
//! produces a byte-identical log on every run.

mod runlog;

pub use runlog::{Event, RunLog, RunLogError, TimedEvent};

use std::collections::VecDeque;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioChunk, AudioError, AudioSource, FrameBuffer};
use crate::backends::{BackendError, SpeechRequest, SpeechSynthesizer, SpeechTranslator, TranslationRequest};
use crate::policies::{decide, Action, PolicyConfig, PolicyInput};
use crate::transcript::{Hypothesis, Transcript, TranscriptError, TranscriptSegment};
use runlog::round_micros;

const TIME_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pacing {
    /// Release chunk i only once its audio has elapsed on the wall clock.
    Realtime,
    /// Release all chunks immediately.
    Unpaced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockKind {
    Wall,
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub window_seconds: f64,
    pub policy: PolicyConfig,
    pub pacing: Pacing,
    pub source_language: String,
    pub clock: ClockKind,
    /// Extra synthesis attempts after a retriable failure.
    pub tts_retries: u32,
}

impl PipelineConfig {
    /// Unpaced replay on the simulated clock.
    pub fn simulated(window_seconds: f64, policy: PolicyConfig) -> Self {
        Self {
            window_seconds,
            policy,
            pacing: Pacing::Unpaced,
            source_language: String::new(),
            clock: ClockKind::Simulated,
            tts_retries: 2,
        }
    }

    pub fn realtime(window_seconds: f64, policy: PolicyConfig) -> Self {
        Self { pacing: Pacing::Realtime, clock: ClockKind::Wall, ..Self::simulated(window_seconds, policy) }
    }

    pub fn with_language(mut self, language: impl Into<String>) -> Self {
        self.source_language = language.into();
        self
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.window_seconds > 0.0) || !self.window_seconds.is_finite() {
            return Err(PipelineError::Config(format!("window must be positive, got {}", self.window_seconds)));
        }
        if self.clock == ClockKind::Simulated && self.pacing == Pacing::Realtime {
            return Err(PipelineError::Config("simulated clock requires unpaced pacing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("speech translation backend failed: {0}")]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub transcript: Transcript,
    pub log: RunLog,
}

/// A run aborted by a backend or configuration error, with the events logged so far.
#[derive(Debug)]
pub struct RunFailure {
    pub error: PipelineError,
    pub partial_log: Box<RunLog>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run failed after {} events: {}", self.partial_log.events().len(), self.error)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Splits the source into consecutive windows; the last chunk holds the remainder.
pub fn slice_stream(source: &AudioSource, window_seconds: f64) -> Vec<AudioChunk> {
    let rate = source.sample_rate;
    if source.samples.is_empty() || rate == 0 || !(window_seconds > 0.0) {
        return Vec::new();
    }
    let window = ((window_seconds * rate as f64).round() as usize).max(1);
    source
        .samples
        .chunks(window)
        .enumerate()
        .map(|(i, samples)| {
            AudioChunk::new(samples.to_vec(), rate, (i * window) as f64 / rate as f64).expect("non-empty chunk")
        })
        .collect()
}

struct PacedChunk {
    chunk: AudioChunk,
    last: bool,
}

struct SpeakJob {
    index: usize,
    text: String,
    emitted_at: f64,
}

enum Clock {
    Wall(Instant),
    Simulated(f64),
}

impl Clock {
    fn now(&self) -> f64 {
        match self {
            Clock::Wall(start) => round_micros(start.elapsed().as_secs_f64()),
            Clock::Simulated(t) => *t,
        }
    }
}

/// Runs one utterance through the full loop.
pub fn run<S, T>(
    source: &AudioSource,
    config: &PipelineConfig,
    st: &mut S,
    tts: &mut T,
) -> Result<RunOutput, RunFailure>
where
    S: SpeechTranslator + ?Sized,
    T: SpeechSynthesizer + Send + ?Sized,
{
    let fail = |error: PipelineError, events: Vec<TimedEvent>| RunFailure {
        error,
        partial_log: Box::new(RunLog::from_events(events).unwrap_or_default()),
    };
    if let Err(e) = config.validate() {
        return Err(fail(e, Vec::new()));
    }

    let chunks = slice_stream(source, config.window_seconds);
    if chunks.is_empty() {
        let log =
            RunLog::from_events(vec![TimedEvent { at: 0.0, event: Event::StreamEnded { total_source_seconds: 0.0 } }])
                .expect("single event");
        return Ok(RunOutput { transcript: Transcript::new(), log });
    }
    let total_source: f64 = chunks.iter().map(AudioChunk::duration).sum();

    let start = Instant::now();
    let (chunk_tx, chunk_rx) = mpsc::channel::<PacedChunk>();
    let (cancel_tx, cancel_rx) = mpsc::channel::<()>();
    let (speak_tx, speak_rx) = mpsc::channel::<SpeakJob>();

    std::thread::scope(|scope| {
        let pacing = config.pacing;
        scope.spawn(move || {
            let n = chunks.len();
            for (i, chunk) in chunks.into_iter().enumerate() {
                if pacing == Pacing::Realtime {
                    let due = start + Duration::from_secs_f64(chunk.end_offset());
                    let wait = due.saturating_duration_since(Instant::now());
                    match cancel_rx.recv_timeout(wait) {
                        Err(RecvTimeoutError::Timeout) => {}
                        _ => return,
                    }
                }
                if chunk_tx.send(PacedChunk { chunk, last: i + 1 == n }).is_err() {
                    return;
                }
            }
        });

        let clock_kind = config.clock;
        let retries = config.tts_retries;
        let speaker = scope.spawn(move || speaker_loop(speak_rx, tts, clock_kind, start, retries));

        let mut translator = Translator {
            config,
            clock: match config.clock {
                ClockKind::Wall => Clock::Wall(start),
                ClockKind::Simulated => Clock::Simulated(0.0),
            },
            buffer: FrameBuffer::new(),
            transcript: Transcript::new(),
            events: Vec::new(),
            speak_tx,
        };
        let outcome = translator.run(chunk_rx, st);
        let Translator { clock, mut transcript, mut events, speak_tx, .. } = translator;
        drop(speak_tx);
        drop(cancel_tx);
        let speech = speaker.join().expect("speaker worker panicked");

        for (index, duration) in &speech.durations {
            transcript.set_speech_duration(*index, *duration);
        }
        let mut merged = merge_events(std::mem::take(&mut events), speech.events);
        if let Err(error) = outcome {
            return Err(fail(error, merged));
        }
        let end = merged.last().map_or(0.0, |e| e.at).max(clock.now());
        merged.push(TimedEvent {
            at: end,
            event: Event::StreamEnded { total_source_seconds: round_micros(total_source) },
        });
        match RunLog::from_events(merged) {
            Ok(log) => Ok(RunOutput { transcript, log }),
            Err(e) => Err(fail(PipelineError::Config(e.to_string()), Vec::new())),
        }
    })
}

/// Merges two time-ordered event lists; translator events win ties.
fn merge_events(translator: Vec<TimedEvent>, speaker: Vec<TimedEvent>) -> Vec<TimedEvent> {
    let mut out = Vec::with_capacity(translator.len() + speaker.len());
    let mut a = translator.into_iter().peekable();
    let mut b = speaker.into_iter().peekable();
    loop {
        let take_a = match (a.peek(), b.peek()) {
            (Some(x), Some(y)) => x.at <= y.at,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        out.push(if take_a { a.next() } else { b.next() }.expect("peeked"));
    }
    out
}

struct Translator<'a> {
    config: &'a PipelineConfig,
    clock: Clock,
    buffer: FrameBuffer,
    transcript: Transcript,
    events: Vec<TimedEvent>,
    speak_tx: mpsc::Sender<SpeakJob>,
}

impl Translator<'_> {
    fn log(&mut self, event: Event) {
        let at = self.clock.now();
        self.events.push(TimedEvent { at, event });
    }

    fn run<S: SpeechTranslator + ?Sized>(
        &mut self,
        rx: mpsc::Receiver<PacedChunk>,
        st: &mut S,
    ) -> Result<(), PipelineError> {
        let mut pending: VecDeque<PacedChunk> = VecDeque::new();
        let mut previous: Option<Hypothesis> = None;
        let mut request_id = 0u64;

        loop {
            if pending.is_empty() {
                match rx.recv() {
                    Ok(c) => pending.push_back(c),
                    Err(_) => return Ok(()),
                }
            }
            if let Clock::Simulated(now) = &mut self.clock {
                let boundary = round_micros(pending[0].chunk.end_offset());
                *now = now.max(boundary);
            }

            // drain everything that has arrived by now, then query once
            let mut end_of_stream = false;
            loop {
                while let Some(front) = pending.front() {
                    if let Clock::Simulated(now) = self.clock {
                        if front.chunk.end_offset() > now + TIME_EPSILON {
                            break;
                        }
                    }
                    let PacedChunk { chunk, last } = pending.pop_front().expect("front");
                    self.log(Event::ChunkReceived {
                        start_offset: round_micros(chunk.start_offset()),
                        // rounded boundaries so logged durations sum to the logged total
                        duration: round_micros(round_micros(chunk.end_offset()) - round_micros(chunk.start_offset())),
                    });
                    self.buffer.append(chunk)?;
                    end_of_stream |= last;
                }
                if end_of_stream || !pending.is_empty() {
                    break;
                }
                let next = match self.clock {
                    Clock::Simulated(_) => rx.recv().ok(),
                    Clock::Wall(_) => rx.try_recv().ok(),
                };
                match next {
                    Some(c) => pending.push_back(c),
                    None => break,
                }
            }

            let request = TranslationRequest {
                audio: self.buffer.chunks().to_vec(),
                prior_text: self.transcript.full_text(),
                source_language: self.config.source_language.clone(),
                request_id,
            };
            let buffer_seconds = self.buffer.duration();
            let logged_buffer =
                round_micros(self.buffer.end_offset()) - round_micros(self.buffer.end_offset() - buffer_seconds);
            self.log(Event::QueryStarted { request_id, buffer_seconds: round_micros(logged_buffer) });
            let hypothesis = st.translate(&request)?;
            if let Clock::Simulated(now) = &mut self.clock {
                *now = round_micros(*now + hypothesis.compute_seconds);
            }
            self.log(Event::QueryFinished {
                request_id,
                text: hypothesis.text.clone(),
                avg_logprob: hypothesis.avg_logprob,
                no_speech_prob: hypothesis.no_speech_prob,
                compute_seconds: hypothesis.compute_seconds,
            });

            let decision = decide(
                &self.config.policy,
                &PolicyInput {
                    current: &hypothesis,
                    previous: previous.as_ref(),
                    buffer_duration: buffer_seconds,
                    end_of_stream,
                },
            );
            self.log(Event::Decision { request_id, action: decision.action, reason: decision.reason.clone() });

            if decision.action == Action::Speak {
                let text = hypothesis.text.trim().to_string();
                let emitted_at = self.clock.now();
                let source_consumed = round_micros(self.buffer.end_offset());
                self.transcript.commit(TranscriptSegment {
                    text: text.clone(),
                    emitted_at,
                    source_consumed,
                    speech_duration: 0.0,
                })?;
                self.log(Event::Emission { text: text.clone(), source_consumed });
                let index = self.transcript.len() - 1;
                // a closed speaker only loses audio, never text
                let _ = self.speak_tx.send(SpeakJob { index, text, emitted_at });
                self.buffer.clear();
                previous = None;
            } else {
                previous = Some(hypothesis);
            }
            request_id += 1;

            if end_of_stream {
                self.buffer.clear();
                return Ok(());
            }
        }
    }
}

struct SpeechOutcome {
    events: Vec<TimedEvent>,
    durations: Vec<(usize, f64)>,
}

fn speaker_loop<T: SpeechSynthesizer + ?Sized>(
    jobs: mpsc::Receiver<SpeakJob>,
    tts: &mut T,
    clock: ClockKind,
    start: Instant,
    retries: u32,
) -> SpeechOutcome {
    let mut events = Vec::new();
    let mut durations = Vec::new();
    let mut free_at = 0.0f64;
    let wall_now = || round_micros(start.elapsed().as_secs_f64());

    for job in jobs {
        let request = SpeechRequest { text: job.text, request_id: job.index as u64 };
        let mut attempt = 0;
        let result = loop {
            match tts.speak(&request) {
                Err(e) if e.is_retriable() && attempt < retries => attempt += 1,
                other => break other,
            }
        };
        let begin = free_at.max(job.emitted_at);
        match result {
            Ok(speech) => {
                let at = match clock {
                    ClockKind::Simulated => round_micros(begin + speech.compute_seconds),
                    ClockKind::Wall => wall_now(),
                };
                free_at = at;
                events.push(TimedEvent { at, event: Event::SpeechFinished { duration: speech.audio_duration } });
                durations.push((job.index, speech.audio_duration));
            }
            Err(e) => {
                let at = match clock {
                    ClockKind::Simulated => begin,
                    ClockKind::Wall => wall_now(),
                };
                free_at = at;
                log::warn!("synthesis failed for segment {}: {e}", job.index);
                events.push(TimedEvent {
                    at,
                    event: Event::Warning { message: format!("synthesis failed for segment {}: {e}", job.index) },
                });
                events.push(TimedEvent { at, event: Event::SpeechFinished { duration: 0.0 } });
                durations.push((job.index, 0.0));
            }
        }
    }
    SpeechOutcome { events, durations }
}
