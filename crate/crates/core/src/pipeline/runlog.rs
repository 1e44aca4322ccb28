use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policies::Action;

#[derive(Debug, Error)]
pub enum RunLogError {
    #[error("event at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("event timestamps decrease at index {index} ({previous:.6}s -> {at:.6}s)")]
    NonMonotonic { index: usize, previous: f64, at: f64 },
    #[error("{0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    ChunkReceived { start_offset: f64, duration: f64 },
    QueryStarted { request_id: u64, buffer_seconds: f64 },
    QueryFinished { request_id: u64, text: String, avg_logprob: f64, no_speech_prob: f64, compute_seconds: f64 },
    Decision { request_id: u64, action: Action, reason: String },
    Emission { text: String, source_consumed: f64 },
    SpeechFinished { duration: f64 },
    Warning { message: String },
    StreamEnded { total_source_seconds: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    /// Seconds since stream start, microsecond resolution.
    pub at: f64,
    #[serde(flatten)]
    pub event: Event,
}

pub(crate) fn round_micros(seconds: f64) -> f64 {
    (seconds * 1e6).round() / 1e6
}

/// Ordered, timestamped record of one pipeline run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    events: Vec<TimedEvent>,
}

impl RunLog {
    /// Validates that timestamps are non-decreasing.
    pub fn from_events(events: Vec<TimedEvent>) -> Result<Self, RunLogError> {
        for (i, w) in events.windows(2).enumerate() {
            if w[1].at < w[0].at {
                return Err(RunLogError::NonMonotonic { index: i + 1, previous: w[0].at, at: w[1].at });
            }
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[TimedEvent] {
        &self.events
    }

    /// True when the log ends the stream.
    pub fn is_complete(&self) -> bool {
        self.events.iter().any(|e| matches!(e.event, Event::StreamEnded { .. }))
    }

    /// Total source duration from the StreamEnded event, or the sum of received chunks.
    pub fn total_source_seconds(&self) -> f64 {
        self.events
            .iter()
            .find_map(|e| match e.event {
                Event::StreamEnded { total_source_seconds } => Some(total_source_seconds),
                _ => None,
            })
            .unwrap_or_else(|| self.received_source_seconds())
    }

    pub fn received_source_seconds(&self) -> f64 {
        self.events
            .iter()
            .filter_map(|e| match e.event {
                Event::ChunkReceived { duration, .. } => Some(duration),
                _ => None,
            })
            .sum()
    }

    pub fn emission_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e.event, Event::Emission { .. })).count()
    }

    pub fn emissions(&self) -> impl Iterator<Item = (f64, &str, f64)> {
        self.events.iter().filter_map(|e| match &e.event {
            Event::Emission { text, source_consumed } => Some((e.at, text.as_str(), *source_consumed)),
            _ => None,
        })
    }

    pub fn query_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e.event, Event::QueryStarted { .. })).count()
    }

    /// Checks the structural invariants of a completed run: every emission is
    /// preceded by a Speak decision, at most one query is in flight, and the
    /// stream total matches the received chunks.
    pub fn check_invariants(&self) -> Result<(), RunLogError> {
        let mut in_flight: Option<u64> = None;
        let mut last_speak = false;
        for (i, e) in self.events.iter().enumerate() {
            match &e.event {
                Event::QueryStarted { request_id, .. } => {
                    if let Some(open) = in_flight {
                        return Err(RunLogError::Invariant(format!(
                            "query {request_id} started at event {i} while {open} in flight"
                        )));
                    }
                    in_flight = Some(*request_id);
                    last_speak = false;
                }
                Event::QueryFinished { request_id, .. } => {
                    if in_flight != Some(*request_id) {
                        return Err(RunLogError::Invariant(format!("unmatched QueryFinished {request_id}")));
                    }
                    in_flight = None;
                }
                Event::Decision { action, .. } => last_speak = *action == Action::Speak,
                Event::Emission { .. } => {
                    if !last_speak {
                        return Err(RunLogError::Invariant(format!("emission at event {i} without Speak decision")));
                    }
                    last_speak = false;
                }
                _ => {}
            }
        }
        if self.is_complete() && (self.total_source_seconds() - self.received_source_seconds()).abs() > 1e-6 {
            return Err(RunLogError::Invariant("total_source_seconds differs from received chunks".into()));
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<(), RunLogError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_jsonl().as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn parse_jsonl(reader: impl BufRead) -> Result<Self, RunLogError> {
        let mut events = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event =
                serde_json::from_str(&line).map_err(|e| RunLogError::Parse { line: i + 1, message: e.to_string() })?;
            events.push(event);
        }
        Self::from_events(events)
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self, RunLogError> {
        Self::parse_jsonl(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let log = RunLog::from_events(vec![
            TimedEvent { at: 1.0, event: Event::ChunkReceived { start_offset: 0.0, duration: 1.0 } },
            TimedEvent { at: 1.0, event: Event::QueryStarted { request_id: 0, buffer_seconds: 1.0 } },
            TimedEvent {
                at: 1.25,
                event: Event::QueryFinished {
                    request_id: 0,
                    text: "hi".into(),
                    avg_logprob: -0.2,
                    no_speech_prob: 0.1,
                    compute_seconds: 0.25,
                },
            },
            TimedEvent {
                at: 1.25,
                event: Event::Decision { request_id: 0, action: Action::Speak, reason: "greedy".into() },
            },
            TimedEvent { at: 1.25, event: Event::Emission { text: "hi".into(), source_consumed: 1.0 } },
            TimedEvent { at: 1.25, event: Event::StreamEnded { total_source_seconds: 1.0 } },
        ])
        .unwrap();
        log.check_invariants().unwrap();
        let text = log.to_jsonl();
        assert!(text.lines().next().unwrap().starts_with(r#"{"at":1.0,"event":"chunk_received""#));
        assert_eq!(RunLog::parse_jsonl(text.as_bytes()).unwrap(), log);
    }

    #[test]
    fn decreasing_timestamps_rejected() {
        let err = RunLog::from_events(vec![
            TimedEvent { at: 2.0, event: Event::Warning { message: "a".into() } },
            TimedEvent { at: 1.0, event: Event::Warning { message: "b".into() } },
        ])
        .unwrap_err();
        assert!(matches!(err, RunLogError::NonMonotonic { index: 1, .. }));
    }

    #[test]
    fn emission_without_speak_violates_invariants() {
        let log = RunLog::from_events(vec![TimedEvent {
            at: 0.0,
            event: Event::Emission { text: "x".into(), source_consumed: 0.0 },
        }])
        .unwrap();
        assert!(log.check_invariants().is_err());
    }

    #[test]
    fn micros_rounding() {
        assert_eq!(round_micros(1.234_567_89), 1.234_568);
    }
}
