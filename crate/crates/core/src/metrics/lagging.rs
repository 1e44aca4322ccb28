use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::pipeline::{Event, RunLog};

/// Per-token emission delays for one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySequence {
    delays: Vec<f64>,
    source_duration: f64,
    reference_token_count: usize,
}

impl DelaySequence {
    pub fn new(delays: Vec<f64>, source_duration: f64, reference_token_count: usize) -> Result<Self, MetricsError> {
        if !(source_duration > 0.0) {
            return Err(MetricsError::InvalidDelays(format!("source duration {source_duration} must be positive")));
        }
        if reference_token_count == 0 {
            return Err(MetricsError::InvalidDelays("reference has no tokens".into()));
        }
        if delays.iter().any(|d| !(*d >= 0.0)) {
            return Err(MetricsError::InvalidDelays("delays must be non-negative".into()));
        }
        if delays.windows(2).any(|w| w[1] < w[0]) {
            return Err(MetricsError::InvalidDelays("delays must be non-decreasing".into()));
        }
        Ok(Self { delays, source_duration, reference_token_count })
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn source_duration(&self) -> f64 {
        self.source_duration
    }

    pub fn reference_token_count(&self) -> usize {
        self.reference_token_count
    }

    /// Index (1-based) of the first token emitted at or after the end of the source,
    /// or the token count when every token precedes it.
    pub fn cutoff(&self) -> usize {
        self.delays.iter().position(|&d| d >= self.source_duration).map_or(self.delays.len(), |i| i + 1)
    }
}

/// Average Lagging: mean excess delay over an ideal translator that emits
/// reference-length output evenly across the source, up to the cutoff token.
pub fn average_lagging(seq: &DelaySequence) -> f64 {
    let tau = seq.cutoff();
    if tau == 0 {
        return 0.0;
    }
    let rate = seq.source_duration / seq.reference_token_count as f64;
    let total: f64 = seq.delays[..tau].iter().enumerate().map(|(i, d)| d - i as f64 * rate).sum();
    total / tau as f64
}

/// Which timestamp each emitted token inherits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatencyMode {
    /// Source seconds consumed at emission (ignores computation).
    SourceTime,
    /// Clock time of the emission, charging model and pipeline cost.
    ComputationAware,
}

/// Whitespace tokens of every emission, each carrying its segment's delay.
pub fn delays_from_log(log: &RunLog, mode: LatencyMode, reference: &str) -> Result<DelaySequence, MetricsError> {
    if !log.is_complete() {
        return Err(MetricsError::IncompleteLog);
    }
    let mut delays = Vec::new();
    for timed in log.events() {
        if let Event::Emission { text, source_consumed } = &timed.event {
            let delay = match mode {
                LatencyMode::SourceTime => *source_consumed,
                LatencyMode::ComputationAware => timed.at,
            };
            delays.extend(std::iter::repeat_n(delay, text.split_whitespace().count()));
        }
    }
    DelaySequence::new(delays, log.total_source_seconds(), reference.split_whitespace().count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::TimedEvent;

    fn al(delays: &[f64], ts: f64, refs: usize) -> f64 {
        average_lagging(&DelaySequence::new(delays.to_vec(), ts, refs).unwrap())
    }

    #[test]
    fn worked_examples() {
        assert_eq!(al(&[1.0, 2.0, 3.0, 4.0], 4.0, 4), 1.0);
        assert_eq!(al(&[5.0], 5.0, 1), 5.0);
        let seq = DelaySequence::new(vec![4.0, 4.0], 4.0, 2).unwrap();
        assert_eq!(seq.cutoff(), 1);
        assert_eq!(average_lagging(&seq), 4.0);
    }

    #[test]
    fn empty_delays_are_zero() {
        assert_eq!(al(&[], 3.0, 2), 0.0);
    }

    #[test]
    fn invalid_sequences() {
        assert!(DelaySequence::new(vec![2.0, 1.0], 3.0, 2).is_err());
        assert!(DelaySequence::new(vec![1.0], 0.0, 2).is_err());
        assert!(DelaySequence::new(vec![1.0], 1.0, 0).is_err());
    }

    fn log_with(emissions: &[(&str, f64, f64)], total: f64) -> RunLog {
        let mut events: Vec<TimedEvent> = emissions
            .iter()
            .map(|(text, consumed, at)| TimedEvent {
                at: *at,
                event: Event::Emission { text: text.to_string(), source_consumed: *consumed },
            })
            .collect();
        let end = emissions.last().map_or(0.0, |e| e.2);
        events.push(TimedEvent { at: end, event: Event::StreamEnded { total_source_seconds: total } });
        RunLog::from_events(events).unwrap()
    }

    #[test]
    fn tokens_inherit_segment_delay() {
        let log = log_with(&[("hello world", 2.0, 2.3)], 2.0);
        let src = delays_from_log(&log, LatencyMode::SourceTime, "hello world").unwrap();
        assert_eq!(src.delays(), &[2.0, 2.0]);
        let ca = delays_from_log(&log, LatencyMode::ComputationAware, "hello world").unwrap();
        assert_eq!(ca.delays(), &[2.3, 2.3]);

        let two = log_with(&[("a", 1.0, 1.0), ("b c", 3.0, 3.0)], 3.0);
        assert_eq!(delays_from_log(&two, LatencyMode::ComputationAware, "x y z").unwrap().delays(), &[1.0, 3.0, 3.0]);
    }

    #[test]
    fn no_emissions_gives_zero_lagging() {
        let log = log_with(&[], 2.0);
        let d = delays_from_log(&log, LatencyMode::SourceTime, "ref").unwrap();
        assert!(d.delays().is_empty());
        assert_eq!(average_lagging(&d), 0.0);
    }

    #[test]
    fn incomplete_log_is_rejected() {
        let log = RunLog::from_events(vec![TimedEvent {
            at: 1.0,
            event: Event::Emission { text: "x".into(), source_consumed: 1.0 },
        }])
        .unwrap();
        assert_eq!(delays_from_log(&log, LatencyMode::SourceTime, "x").unwrap_err(), MetricsError::IncompleteLog);
    }
}
