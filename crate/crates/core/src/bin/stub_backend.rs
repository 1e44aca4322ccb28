//! Scripted stand-in for a model process speaking the line-delimited JSON protocol.
//!
//! `translate` answers with a deterministic description of the audio it received,
//! `speak` with `chars × --tts-rate` seconds. With `--shuffle-window N` responses are
//! held until N requests are pending and then written in a seeded random order.
//!
//!     stub-backend [--shuffle-window N] [--seed S] [--tts-rate R]
//!                  [--no-speech-prob P] [--compute-seconds C]

use std::io::{self, BufRead, Write};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

struct Options {
    shuffle_window: usize,
    seed: u64,
    tts_rate: f64,
    no_speech_prob: f64,
    compute_seconds: f64,
}

fn parse_args() -> Result<Options, String> {
    let mut opts = Options { shuffle_window: 1, seed: 0, tts_rate: 0.06, no_speech_prob: 0.1, compute_seconds: 0.0 };
    let mut args = std::env::args().skip(1);
    while let Some(flag) = args.next() {
        let value = args.next().ok_or_else(|| format!("{flag} needs a value"))?;
        let bad = |_| format!("bad value for {flag}: {value}");
        match flag.as_str() {
            "--shuffle-window" => opts.shuffle_window = value.parse().map_err(|_| bad(()))?,
            "--seed" => opts.seed = value.parse().map_err(|_| bad(()))?,
            "--tts-rate" => opts.tts_rate = value.parse().map_err(|_| bad(()))?,
            "--no-speech-prob" => opts.no_speech_prob = value.parse().map_err(|_| bad(()))?,
            "--compute-seconds" => opts.compute_seconds = value.parse().map_err(|_| bad(()))?,
            _ => return Err(format!("unknown flag {flag}")),
        }
    }
    Ok(opts)
}

fn respond(line: &str, opts: &Options) -> Value {
    let request: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return json!({"id": -1, "error": format!("unparseable request: {e}")}),
    };
    let Some(id) = request.get("id").and_then(Value::as_i64) else {
        return json!({"id": -1, "error": "request has no integer id"});
    };
    match request.get("op").and_then(Value::as_str) {
        Some("translate") => {
            let audio = request.get("audio_b64").and_then(Value::as_str).unwrap_or("");
            let bytes = match BASE64.decode(audio) {
                Ok(b) if !b.is_empty() => b,
                Ok(_) => return json!({"id": id, "error": "empty audio"}),
                Err(e) => return json!({"id": id, "error": format!("bad base64: {e}")}),
            };
            let seconds = bytes.len() as f64 / 2.0 / 16_000.0;
            json!({
                "id": id,
                "text": format!("heard {seconds:.2} seconds"),
                "avg_logprob": -0.25,
                "no_speech_prob": opts.no_speech_prob,
                "compute_seconds": opts.compute_seconds,
            })
        }
        Some("speak") => match request.get("text").and_then(Value::as_str) {
            Some(text) if !text.is_empty() => json!({
                "id": id,
                "audio_duration": text.chars().count() as f64 * opts.tts_rate,
                "compute_seconds": opts.compute_seconds,
            }),
            _ => json!({"id": id, "error": "empty text"}),
        },
        other => json!({"id": id, "error": format!("unknown op {other:?}")}),
    }
}

fn flush(held: &mut Vec<Value>, rng: &mut ChaCha8Rng, out: &mut impl Write) -> io::Result<()> {
    held.shuffle(rng);
    for response in held.drain(..) {
        writeln!(out, "{response}")?;
    }
    out.flush()
}

fn main() {
    let opts = match parse_args() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("stub-backend: {e}");
            std::process::exit(2);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut held = Vec::new();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        held.push(respond(&line, &opts));
        if held.len() >= opts.shuffle_window.max(1) && flush(&mut held, &mut rng, &mut out).is_err() {
            return;
        }
    }
    let _ = flush(&mut held, &mut rng, &mut out);
}
