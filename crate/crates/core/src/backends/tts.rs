use std::io::Read;
use std::time::{Duration, Instant};

use super::{BackendError, SpeechRequest, SpeechResult, SpeechSynthesizer};

/// Environment variable holding the remote synthesis API key.
pub const DEFAULT_TTS_API_KEY_ENV: &str = "S2ST_TTS_API_KEY";

/// Synthesizer whose output length is proportional to the character count.
#[derive(Debug, Clone, PartialEq)]
pub struct MockSynthesizer {
    pub rate_seconds_per_char: f64,
    /// Reported synthesis cost per request.
    pub compute_seconds: f64,
    /// Actually sleep for `compute_seconds` (wall-clock runs).
    pub sleep: bool,
}

impl Default for MockSynthesizer {
    fn default() -> Self {
        Self::new(0.06)
    }
}

impl MockSynthesizer {
    pub fn new(rate_seconds_per_char: f64) -> Self {
        Self { rate_seconds_per_char, compute_seconds: 0.0, sleep: false }
    }

    pub fn duration_for(&self, text: &str) -> f64 {
        text.chars().count() as f64 * self.rate_seconds_per_char
    }
}

impl SpeechSynthesizer for MockSynthesizer {
    fn speak(&mut self, request: &SpeechRequest) -> Result<SpeechResult, BackendError> {
        if request.text.is_empty() {
            return Err(BackendError::InvalidRequest("speech text is empty".into()));
        }
        if self.sleep && self.compute_seconds > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(self.compute_seconds));
        }
        Ok(SpeechResult { audio_duration: self.duration_for(&request.text), compute_seconds: self.compute_seconds })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteTtsConfig {
    /// Endpoint accepting `POST {"text": ...}` and returning 16 kHz 16-bit mono PCM.
    pub url: String,
    pub api_key_env: String,
    pub api_key_header: String,
    pub model_id: Option<String>,
    pub timeout: Duration,
}

impl RemoteTtsConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key_env: DEFAULT_TTS_API_KEY_ENV.into(),
            api_key_header: "xi-api-key".into(),
            model_id: None,
            timeout: Duration::from_secs(30),
        }
    }
}

/// Thin HTTP client for a hosted speech-synthesis API.
#[derive(Debug)]
pub struct RemoteSynthesizer {
    config: RemoteTtsConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl RemoteSynthesizer {
    /// Fails when the API key variable is unset or empty.
    pub fn from_env(config: RemoteTtsConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.trim().is_empty()).ok_or_else(|| {
            BackendError::Config(format!("remote TTS disabled: environment variable {} is not set", config.api_key_env))
        })?;
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        Ok(Self { config, api_key, agent })
    }
}

impl SpeechSynthesizer for RemoteSynthesizer {
    fn speak(&mut self, request: &SpeechRequest) -> Result<SpeechResult, BackendError> {
        if request.text.trim().is_empty() {
            return Err(BackendError::InvalidRequest("speech text is empty".into()));
        }
        let started = Instant::now();
        let mut body = serde_json::json!({ "text": request.text });
        if let Some(model) = &self.config.model_id {
            body["model_id"] = serde_json::Value::String(model.clone());
        }
        let response = self
            .agent
            .post(&self.config.url)
            .set(&self.config.api_key_header, &self.api_key)
            .set("Accept", "audio/pcm")
            .set("Content-Type", "application/json")
            .send_string(&body.to_string())
            .map_err(|e| match e {
                ureq::Error::Status(code, _) => BackendError::Transport {
                    message: format!("synthesis request failed with HTTP {code}"),
                    retriable: code == 429 || code >= 500,
                },
                other => BackendError::transport(other.to_string()),
            })?;
        let mut pcm = Vec::new();
        response.into_reader().read_to_end(&mut pcm)?;
        Ok(SpeechResult {
            audio_duration: pcm.len() as f64 / 2.0 / crate::audio::CANONICAL_SAMPLE_RATE as f64,
            compute_seconds: started.elapsed().as_secs_f64(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn speak(tts: &mut MockSynthesizer, text: &str) -> Result<SpeechResult, BackendError> {
        tts.speak(&SpeechRequest { text: text.into(), request_id: 0 })
    }

    #[test]
    fn mock_duration_is_rate_times_chars() {
        let mut tts = MockSynthesizer::new(0.06);
        assert!((speak(&mut tts, "hello").unwrap().audio_duration - 0.30).abs() < 1e-12);
        let mut tts = MockSynthesizer::new(0.05);
        assert!((speak(&mut tts, "hello world").unwrap().audio_duration - 0.55).abs() < 1e-12);
        assert!(matches!(speak(&mut tts, ""), Err(BackendError::InvalidRequest(_))));
    }

    #[test]
    fn mock_duration_is_additive() {
        let tts = MockSynthesizer::new(0.07);
        for (a, b) in [("ab", "cde"), ("", "x"), ("日本", "語 ")] {
            let joined = format!("{a}{b}");
            assert!((tts.duration_for(&joined) - tts.duration_for(a) - tts.duration_for(b)).abs() < 1e-12);
        }
    }

    #[test]
    fn remote_requires_api_key() {
        let mut config = RemoteTtsConfig::new("http://127.0.0.1:9/tts");
        config.api_key_env = "S2ST_TEST_KEY_THAT_IS_NOT_SET".into();
        let err = RemoteSynthesizer::from_env(config).unwrap_err();
        assert!(err.to_string().contains("S2ST_TEST_KEY_THAT_IS_NOT_SET"));
    }
}
