//! Line-delimited JSON client for an external model process.
//!
//! Requests are written to the child's stdin, one JSON object per line; a reader
//! thread routes each stdout line back to its caller by `id`, so responses may
//! arrive in any order and several requests may be in flight at once.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicI64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{BackendError, SpeechRequest, SpeechResult, SpeechSynthesizer, SpeechTranslator, TranslationRequest};
use crate::audio::{encode_pcm16_le, AudioSource, CANONICAL_SAMPLE_RATE};
use crate::transcript::Hypothesis;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub id: i64,
    pub op: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub audio_b64: Option<String>,
    #[serde(default)]
    pub prior_text: String,
    #[serde(default)]
    pub language: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<String>,
}

/// Any response line; which fields are present depends on the request op.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub id: i64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub avg_logprob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub no_speech_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub compute_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub audio_duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

type PendingMap = HashMap<i64, Sender<WireResponse>>;

/// Handle to a spawned model process speaking the line protocol.
pub struct ProcessClient {
    stdin: Mutex<Option<ChildStdin>>,
    pending: Arc<Mutex<PendingMap>>,
    next_id: AtomicI64,
    closed: Arc<AtomicBool>,
    child: Mutex<Child>,
    reader: Option<JoinHandle<()>>,
    timeout: Option<Duration>,
}

impl std::fmt::Debug for ProcessClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProcessClient").field("next_id", &self.next_id).finish_non_exhaustive()
    }
}

/// A request that has been written but not yet answered.
pub struct PendingResponse {
    id: i64,
    rx: Receiver<WireResponse>,
    timeout: Option<Duration>,
}

impl PendingResponse {
    pub fn id(&self) -> i64 {
        self.id
    }

    pub fn wait(self) -> Result<WireResponse, BackendError> {
        let response = match self.timeout {
            Some(t) => self.rx.recv_timeout(t).map_err(|e| match e {
                RecvTimeoutError::Timeout => BackendError::transport(format!("request {} timed out", self.id)),
                RecvTimeoutError::Disconnected => closed_error(self.id),
            })?,
            None => self.rx.recv().map_err(|_| closed_error(self.id))?,
        };
        if let Some(message) = response.error {
            return Err(BackendError::Remote { id: response.id, message });
        }
        Ok(response)
    }
}

fn closed_error(id: i64) -> BackendError {
    BackendError::Transport {
        message: format!("backend process closed before answering request {id}"),
        retriable: false,
    }
}

impl ProcessClient {
    /// Spawns `program args...` with piped stdin/stdout; stderr is inherited.
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, BackendError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| BackendError::Transport {
                message: format!("failed to start {program}: {e}"),
                retriable: false,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        let pending: Arc<Mutex<PendingMap>> = Arc::default();
        let closed = Arc::new(AtomicBool::new(false));
        let reader = {
            let pending = Arc::clone(&pending);
            let closed = Arc::clone(&closed);
            std::thread::Builder::new().name("backend-reader".into()).spawn(move || {
                for line in BufReader::new(stdout).lines() {
                    let Ok(line) = line else { break };
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<WireResponse>(&line) {
                        Ok(resp) => match pending.lock().unwrap().remove(&resp.id) {
                            Some(tx) => {
                                let _ = tx.send(resp);
                            }
                            None => log::warn!("backend response for unknown id {}: {line}", resp.id),
                        },
                        Err(e) => log::warn!("unparseable backend line ({e}): {line}"),
                    }
                }
                closed.store(true, Ordering::SeqCst);
                // dropping the senders wakes every waiter with a transport error
                pending.lock().unwrap().clear();
            })?
        };

        Ok(Self {
            stdin: Mutex::new(Some(stdin)),
            pending,
            next_id: AtomicI64::new(1),
            closed,
            child: Mutex::new(child),
            reader: Some(reader),
            timeout: None,
        })
    }

    /// Spawns from a whitespace-separated command line.
    pub fn spawn_command_line(command: &str) -> Result<Self, BackendError> {
        let mut parts = command.split_whitespace().map(str::to_string);
        let program = parts.next().ok_or_else(|| BackendError::Config("empty backend command".into()))?;
        let args: Vec<String> = parts.collect();
        Self::spawn(&program, &args)
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }

    /// Writes a request (its `id` is replaced by a fresh one) without waiting.
    pub fn submit(&self, mut request: WireRequest) -> Result<PendingResponse, BackendError> {
        if self.closed.load(Ordering::SeqCst) {
            return Err(closed_error(request.id));
        }
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        request.id = id;
        let (tx, rx) = mpsc::channel();
        self.pending.lock().unwrap().insert(id, tx);
        let mut line = serde_json::to_string(&request).map_err(|e| BackendError::Protocol(e.to_string()))?;
        line.push('\n');
        let write = {
            let mut guard = self.stdin.lock().unwrap();
            match guard.as_mut() {
                Some(stdin) => stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()),
                None => Err(std::io::Error::new(std::io::ErrorKind::BrokenPipe, "stdin closed")),
            }
        };
        if let Err(e) = write {
            self.pending.lock().unwrap().remove(&id);
            return Err(BackendError::Transport { message: format!("write to backend failed: {e}"), retriable: false });
        }
        Ok(PendingResponse { id, rx, timeout: self.timeout })
    }

    pub fn call(&self, request: WireRequest) -> Result<WireResponse, BackendError> {
        self.submit(request)?.wait()
    }
}

impl Drop for ProcessClient {
    fn drop(&mut self) {
        // closing stdin asks the child to exit
        self.stdin.lock().unwrap().take();
        let mut child = self.child.lock().unwrap();
        let deadline = Instant::now() + Duration::from_secs(2);
        loop {
            match child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(10)),
                _ => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break;
                }
            }
        }
        if let Some(reader) = self.reader.take() {
            let _ = reader.join();
        }
    }
}

/// Speech-translation backend over a [`ProcessClient`].
#[derive(Debug, Clone)]
pub struct ProcessTranslator {
    client: Arc<ProcessClient>,
}

impl ProcessTranslator {
    pub fn new(client: Arc<ProcessClient>) -> Self {
        Self { client }
    }

    pub fn wire_request(request: &TranslationRequest) -> Result<WireRequest, BackendError> {
        request.validate()?;
        let rate = request.audio[0].sample_rate();
        let mut samples = request.samples();
        if rate != CANONICAL_SAMPLE_RATE {
            samples = AudioSource::new(samples, rate).resample(CANONICAL_SAMPLE_RATE).samples;
        }
        Ok(WireRequest {
            id: request.request_id as i64,
            op: "translate".into(),
            audio_b64: Some(BASE64.encode(encode_pcm16_le(&samples))),
            prior_text: request.prior_text.clone(),
            language: request.source_language.clone(),
            text: None,
        })
    }
}

impl SpeechTranslator for ProcessTranslator {
    fn translate(&mut self, request: &TranslationRequest) -> Result<Hypothesis, BackendError> {
        let resp = self.client.call(Self::wire_request(request)?)?;
        let missing = |field: &str| BackendError::Protocol(format!("translate response {} lacks {field}", resp.id));
        let text = resp.text.clone().ok_or_else(|| missing("text"))?;
        let no_speech_prob = resp.no_speech_prob.ok_or_else(|| missing("no_speech_prob"))?;
        let compute_seconds = resp.compute_seconds.unwrap_or(0.0);
        if !(0.0..=1.0).contains(&no_speech_prob) || !(compute_seconds >= 0.0) {
            return Err(BackendError::Protocol(format!("translate response {} has out-of-range fields", resp.id)));
        }
        Ok(Hypothesis {
            text,
            avg_logprob: resp.avg_logprob.unwrap_or(0.0),
            no_speech_prob,
            language: request.source_language.clone(),
            compute_seconds,
        })
    }
}

/// Speech-synthesis backend over a [`ProcessClient`].
#[derive(Debug, Clone)]
pub struct ProcessSynthesizer {
    client: Arc<ProcessClient>,
}

impl ProcessSynthesizer {
    pub fn new(client: Arc<ProcessClient>) -> Self {
        Self { client }
    }
}

impl SpeechSynthesizer for ProcessSynthesizer {
    fn speak(&mut self, request: &SpeechRequest) -> Result<SpeechResult, BackendError> {
        if request.text.trim().is_empty() {
            return Err(BackendError::InvalidRequest("speech text is empty".into()));
        }
        let resp = self.client.call(WireRequest {
            id: request.request_id as i64,
            op: "speak".into(),
            audio_b64: None,
            prior_text: String::new(),
            language: String::new(),
            text: Some(request.text.clone()),
        })?;
        let audio_duration = resp
            .audio_duration
            .ok_or_else(|| BackendError::Protocol(format!("speak response {} lacks audio_duration", resp.id)))?;
        let compute_seconds = resp.compute_seconds.unwrap_or(0.0);
        if !(audio_duration >= 0.0) || !(compute_seconds >= 0.0) {
            return Err(BackendError::Protocol(format!("speak response {} has negative durations", resp.id)));
        }
        Ok(SpeechResult { audio_duration, compute_seconds })
    }
}
