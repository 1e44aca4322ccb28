//! Speak/wait decision procedures applied to each backend hypothesis.
//!
//! Every policy is a pure function of its configuration and a [`PolicyInput`].
//! On the final query of a stream (`end_of_stream`) every policy speaks any
//! non-blank hypothesis so that the remaining buffer is always translated;
//! a blank hypothesis is never spoken mid-stream.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::normalized_edit_distance;
use crate::transcript::{normalize_whitespace, Hypothesis};

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("policy {kind} requires parameter {param}")]
    MissingParameter { kind: PolicyKind, param: &'static str },
    #[error("policy {kind} does not take parameter {param}")]
    UnexpectedParameter { kind: PolicyKind, param: &'static str },
    #[error("parameter {param}={value} out of range ({range})")]
    OutOfRange { param: &'static str, value: f64, range: &'static str },
    #[error("unknown policy kind {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Greedy,
    Offline,
    ConfidenceAware,
    Consensus,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Greedy => "greedy",
            PolicyKind::Offline => "offline",
            PolicyKind::ConfidenceAware => "cap",
            PolicyKind::Consensus => "cp",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "greedy" | "wait-k" | "waitk" => Ok(PolicyKind::Greedy),
            "offline" => Ok(PolicyKind::Offline),
            "cap" | "confidence" | "confidence-aware" | "confidence_aware" => Ok(PolicyKind::ConfidenceAware),
            "cp" | "consensus" => Ok(PolicyKind::Consensus),
            other => Err(PolicyError::UnknownKind(other.to_string())),
        }
    }
}

/// A validated policy with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyConfig {
    /// Speak every non-blank hypothesis (wait-k with k = one window).
    Greedy,
    /// Never speak before the end of the stream.
    Offline,
    /// Speak when `1 - no_speech_prob >= gamma`.
    ConfidenceAware { gamma: f64 },
    /// Speak when the normalized edit distance to the previous hypothesis is `<= alpha`.
    Consensus { alpha: f64 },
}

impl PolicyConfig {
    pub fn confidence_aware(gamma: f64) -> Result<Self, PolicyError> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(PolicyError::OutOfRange { param: "gamma", value: gamma, range: "[0, 1]" });
        }
        Ok(PolicyConfig::ConfidenceAware { gamma })
    }

    pub fn consensus(alpha: f64) -> Result<Self, PolicyError> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(PolicyError::OutOfRange { param: "alpha", value: alpha, range: ">= 0" });
        }
        Ok(PolicyConfig::Consensus { alpha })
    }

    /// Builds a config from a kind and optional parameters; a parameter must be
    /// present exactly when the kind uses it.
    pub fn from_parts(kind: PolicyKind, gamma: Option<f64>, alpha: Option<f64>) -> Result<Self, PolicyError> {
        let unexpected = |param| Err(PolicyError::UnexpectedParameter { kind, param });
        match kind {
            PolicyKind::Greedy | PolicyKind::Offline => {
                if gamma.is_some() {
                    return unexpected("gamma");
                }
                if alpha.is_some() {
                    return unexpected("alpha");
                }
                Ok(if kind == PolicyKind::Greedy { PolicyConfig::Greedy } else { PolicyConfig::Offline })
            }
            PolicyKind::ConfidenceAware => {
                if alpha.is_some() {
                    return unexpected("alpha");
                }
                Self::confidence_aware(gamma.ok_or(PolicyError::MissingParameter { kind, param: "gamma" })?)
            }
            PolicyKind::Consensus => {
                if gamma.is_some() {
                    return unexpected("gamma");
                }
                Self::consensus(alpha.ok_or(PolicyError::MissingParameter { kind, param: "alpha" })?)
            }
        }
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            PolicyConfig::Greedy => PolicyKind::Greedy,
            PolicyConfig::Offline => PolicyKind::Offline,
            PolicyConfig::ConfidenceAware { .. } => PolicyKind::ConfidenceAware,
            PolicyConfig::Consensus { .. } => PolicyKind::Consensus,
        }
    }

    /// Human-readable row label, e.g. `CAP (γ=0.9)`.
    pub fn label(&self) -> String {
        match self {
            PolicyConfig::Greedy => "Greedy (wait-k)".to_string(),
            PolicyConfig::Offline => "Offline".to_string(),
            PolicyConfig::ConfidenceAware { gamma } => format!("CAP (γ={gamma})"),
            PolicyConfig::Consensus { alpha } => format!("CP (α={alpha})"),
        }
    }

    /// ASCII identifier usable in file names, e.g. `cap-0.9`.
    pub fn slug(&self) -> String {
        match self {
            PolicyConfig::Greedy => "greedy".to_string(),
            PolicyConfig::Offline => "offline".to_string(),
            PolicyConfig::ConfidenceAware { gamma } => format!("cap-{gamma}"),
            PolicyConfig::Consensus { alpha } => format!("cp-{alpha}"),
        }
    }
}

impl FromStr for PolicyConfig {
    type Err = PolicyError;

    /// Parses `greedy`, `offline`, `cap:0.9` / `cap-0.9`, `cp:0.75` / `cp-0.75`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, param) =
            match s.split_once([':', '=']).or_else(|| s.rsplit_once('-').filter(|(_, p)| p.parse::<f64>().is_ok())) {
                Some((k, p)) => (k.parse::<PolicyKind>()?, Some(p)),
                None => (s.parse::<PolicyKind>()?, None),
            };
        let value = param
            .map(|p| {
                p.trim().parse::<f64>().map_err(|_| PolicyError::OutOfRange {
                    param: "threshold",
                    value: f64::NAN,
                    range: "a number",
                })
            })
            .transpose()?;
        match kind {
            PolicyKind::ConfidenceAware => PolicyConfig::from_parts(kind, value, None),
            PolicyKind::Consensus => PolicyConfig::from_parts(kind, None, value),
            _ => PolicyConfig::from_parts(kind, value, None),
        }
    }
}

impl fmt::Display for PolicyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyInput<'a> {
    pub current: &'a Hypothesis,
    /// Hypothesis from the preceding query since the last commit, if any.
    pub previous: Option<&'a Hypothesis>,
    pub buffer_duration: f64,
    pub end_of_stream: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Speak,
    Wait,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub action: Action,
    pub reason: String,
}

impl PolicyDecision {
    fn speak(reason: impl Into<String>) -> Self {
        Self { action: Action::Speak, reason: reason.into() }
    }

    fn wait(reason: impl Into<String>) -> Self {
        Self { action: Action::Wait, reason: reason.into() }
    }

    pub fn is_speak(&self) -> bool {
        self.action == Action::Speak
    }
}

/// Normalized edit distance after whitespace normalization (character level, case-sensitive).
pub fn hypothesis_distance(previous: &str, current: &str) -> f64 {
    normalized_edit_distance(&normalize_whitespace(previous), &normalize_whitespace(current))
}

pub fn decide(config: &PolicyConfig, input: &PolicyInput<'_>) -> PolicyDecision {
    if input.current.is_blank() {
        return PolicyDecision::wait(if input.end_of_stream { "blank final hypothesis" } else { "blank hypothesis" });
    }
    if input.end_of_stream {
        return PolicyDecision::speak("end of stream");
    }
    match *config {
        PolicyConfig::Greedy => PolicyDecision::speak("greedy"),
        PolicyConfig::Offline => PolicyDecision::wait("offline"),
        PolicyConfig::ConfidenceAware { gamma } => {
            let c = input.current.confidence();
            if c >= gamma {
                PolicyDecision::speak(format!("confidence {c:.4} >= {gamma}"))
            } else {
                PolicyDecision::wait(format!("confidence {c:.4} < {gamma}"))
            }
        }
        PolicyConfig::Consensus { alpha } => match input.previous {
            None => PolicyDecision::wait("no previous hypothesis"),
            Some(prev) => {
                let d = hypothesis_distance(&prev.text, &input.current.text);
                if d <= alpha {
                    PolicyDecision::speak(format!("distance {d:.4} <= {alpha}"))
                } else {
                    PolicyDecision::wait(format!("distance {d:.4} > {alpha}"))
                }
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyp(text: &str, nsp: f64) -> Hypothesis {
        Hypothesis::new(text, nsp)
    }

    fn input<'a>(current: &'a Hypothesis, previous: Option<&'a Hypothesis>, eos: bool) -> PolicyInput<'a> {
        PolicyInput { current, previous, buffer_duration: 1.0, end_of_stream: eos }
    }

    #[test]
    fn greedy_and_offline() {
        let h = hyp("hello", 0.5);
        assert!(decide(&PolicyConfig::Greedy, &input(&h, None, false)).is_speak());
        assert!(!decide(&PolicyConfig::Offline, &input(&h, None, false)).is_speak());
        assert!(decide(&PolicyConfig::Offline, &input(&h, None, true)).is_speak());
    }

    #[test]
    fn confidence_threshold() {
        let cap9 = PolicyConfig::confidence_aware(0.9).unwrap();
        assert!(decide(&cap9, &input(&hyp("x", 0.05), None, false)).is_speak());
        let cap5 = PolicyConfig::confidence_aware(0.5).unwrap();
        assert!(!decide(&cap5, &input(&hyp("x", 0.6), None, false)).is_speak());
    }

    #[test]
    fn consensus() {
        let cp = PolicyConfig::consensus(0.5).unwrap();
        let prev = hyp("hello there", 0.0);
        let cur = hyp("hello there!", 0.0);
        let d = decide(&cp, &input(&cur, Some(&prev), false));
        assert!(d.is_speak(), "{}", d.reason);
        let cp75 = PolicyConfig::consensus(0.75).unwrap();
        assert!(!decide(&cp75, &input(&cur, None, false)).is_speak());
    }

    #[test]
    fn consensus_normalizes_whitespace() {
        assert_eq!(hypothesis_distance("  hello   there ", "hello there"), 0.0);
        assert_eq!(hypothesis_distance("Hello", "hello"), 0.2);
    }

    #[test]
    fn blank_hypotheses_wait() {
        let blank = hyp("   ", 0.0);
        for cfg in [PolicyConfig::Greedy, PolicyConfig::Offline] {
            assert!(!decide(&cfg, &input(&blank, None, false)).is_speak());
            assert!(!decide(&cfg, &input(&blank, None, true)).is_speak());
        }
    }

    #[test]
    fn parameter_validation() {
        assert_eq!(
            PolicyConfig::from_parts(PolicyKind::ConfidenceAware, None, None),
            Err(PolicyError::MissingParameter { kind: PolicyKind::ConfidenceAware, param: "gamma" })
        );
        assert!(PolicyConfig::from_parts(PolicyKind::Consensus, None, None).is_err());
        assert!(PolicyConfig::from_parts(PolicyKind::Greedy, Some(0.5), None).is_err());
        assert!(PolicyConfig::confidence_aware(1.5).is_err());
        assert!(PolicyConfig::consensus(-0.1).is_err());
        assert!(PolicyConfig::consensus(f64::NAN).is_err());
    }

    #[test]
    fn parse_labels_and_slugs() {
        let cases = [
            ("greedy", PolicyConfig::Greedy),
            ("Offline", PolicyConfig::Offline),
            ("cap:0.9", PolicyConfig::ConfidenceAware { gamma: 0.9 }),
            ("cp-0.75", PolicyConfig::Consensus { alpha: 0.75 }),
        ];
        for (s, want) in cases {
            let got: PolicyConfig = s.parse().unwrap();
            assert_eq!(got, want);
            assert_eq!(got.slug().parse::<PolicyConfig>().unwrap(), want);
        }
        assert_eq!(PolicyConfig::ConfidenceAware { gamma: 0.9 }.label(), "CAP (γ=0.9)");
        assert!("cap".parse::<PolicyConfig>().is_err());
        assert!("wait".parse::<PolicyConfig>().is_err());
    }
}
