use std::path::Path;
use std::process::{Command, Output};

use s2st_core::audio::{write_wav, AudioSource};

const BIN: &str = env!("CARGO_BIN_EXE_s2st");

// Minimal model process: describes the audio length it received.
const PY_STUB: &str = r#"
import base64, json, sys
for line in sys.stdin:
    req = json.loads(line)
    if req["op"] == "translate":
        seconds = len(base64.b64decode(req["audio_b64"])) / 32000
        resp = {"id": req["id"], "text": "heard %.1f seconds" % seconds, "avg_logprob": -0.2,
                "no_speech_prob": 0.3 if seconds < 2 else 0.05, "compute_seconds": 0.1}
    else:
        resp = {"id": req["id"], "audio_duration": 0.05 * len(req["text"]), "compute_seconds": 0.0}
    print(json.dumps(resp), flush=True)
"#;

fn s2st(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

// what greedy emits at 2 s windows
const REF_A: &str = "heard 2.0 seconds heard 2.0 seconds heard 2.0 seconds heard 0.5 seconds";
const REF_B: &str = "heard 2.0 seconds heard 2.0 seconds heard 2.0 seconds heard 1.0 seconds";

fn fixture(dir: &Path) {
    let rows = [("a", 6.5, REF_A), ("b", 7.0, REF_B), ("c", 3.0, "x")];
    let mut tsv = String::from("id\taudio_path\tduration_seconds\tsource_text\treference_translation\tlanguage\n");
    for (id, seconds, reference) in rows {
        write_wav(dir.join(format!("{id}.wav")), &AudioSource::silence(seconds)).unwrap();
        tsv.push_str(&format!("{id}\t{id}.wav\t{seconds}\tfuente\t{reference}\tes\n"));
    }
    std::fs::write(dir.join("manifest.tsv"), tsv).unwrap();
    std::fs::write(dir.join("stub.py"), PY_STUB).unwrap();
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn record_sweep_and_rescore() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let manifest = dir.path().join("manifest.tsv");
    let traces = dir.path().join("traces");
    let backend_cmd = format!("python3 {}", path(&dir.path().join("stub.py")));

    let out = s2st(&[
        "record-trace",
        "--manifest",
        path(&manifest),
        "--backend-cmd",
        &backend_cmd,
        "--trace-dir",
        path(&traces),
    ]);
    // two utterances of at least 6 s, six policies, two windows
    assert!(stdout(&out).contains("wrote 24 trace files"));

    let results = dir.path().join("results");
    let out = s2st(&[
        "sweep",
        "--manifest",
        path(&manifest),
        "--trace-dir",
        path(&traces),
        "--format",
        "markdown",
        "--out",
        path(&results),
    ]);
    let md = stdout(&out);
    assert!(md.contains("| Window Size (t) | 1s | 2s |"), "{md}");
    for label in ["CAP (γ=0.9)", "CAP (γ=0.5)", "CP (α=0.75)", "CP (α=0.5)", "Greedy (wait-k)", "Offline"] {
        assert!(md.contains(&format!("| {label} |")), "{label} missing from\n{md}");
    }
    assert_eq!(std::fs::read_to_string(results.join("report.md")).unwrap(), md);

    let csv = stdout(&s2st(&[
        "sweep",
        "--manifest",
        path(&manifest),
        "--trace-dir",
        path(&traces),
        "--policy",
        "greedy,offline",
        "--window",
        "2",
        "--format",
        "csv",
    ]));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "policy,window_seconds,bleu,al_seconds,al_ca_seconds,n_examples,failures");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("Greedy (wait-k),2,100"), "{csv}");

    let cell = results.join("greedy__w2");
    let json = stdout(&s2st(&["metrics", path(&cell), "--manifest", path(&manifest)]));
    let report: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(report["bleu"].as_f64(), Some(100.0));
    assert_eq!(report["segments"].as_u64(), Some(8));
    assert_eq!(report["tokens"].as_u64(), Some(24));
    assert!(report["al_ca"].as_f64().unwrap() >= report["al"].as_f64().unwrap());

    // references by line, in file order
    let refs = dir.path().join("refs.txt");
    std::fs::write(&refs, format!("{REF_A}\n{REF_B}\n")).unwrap();
    let by_line = stdout(&s2st(&[
        "metrics",
        path(&cell.join("a.runlog.jsonl")),
        path(&cell.join("b.runlog.jsonl")),
        "--references",
        path(&refs),
    ]));
    let by_line: serde_json::Value = serde_json::from_str(&by_line).unwrap();
    assert_eq!(by_line, report);
}

#[test]
fn run_single_utterance_over_process_backend() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let backend_cmd = format!("python3 {}", path(&dir.path().join("stub.py")));
    let out = dir.path().join("logs");
    let text = stdout(&s2st(&[
        "run",
        "--audio",
        path(&dir.path().join("b.wav")),
        "--reference",
        "heard 7.0 seconds",
        "--backend",
        "process",
        "--backend-cmd",
        &backend_cmd,
        "--tts",
        "process",
        "--policy",
        "offline",
        "--window",
        "2",
        "--out",
        path(&out),
    ]));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("heard 7.0 seconds"));
    let metrics: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(metrics["segments"].as_u64(), Some(1));
    assert!(out.join("b.runlog.jsonl").is_file());
}

#[test]
fn configuration_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let manifest = dir.path().join("manifest.tsv");
    let wav = dir.path().join("a.wav");

    let missing_gamma = s2st(&["run", "--audio", path(&wav), "--policy", "cap", "--trace-dir", "."]);
    assert!(!missing_gamma.status.success());
    assert!(String::from_utf8_lossy(&missing_gamma.stderr).contains("gamma"));

    let no_trace_dir = s2st(&["sweep", "--manifest", path(&manifest)]);
    assert!(!no_trace_dir.status.success());
    assert!(String::from_utf8_lossy(&no_trace_dir.stderr).contains("--trace-dir"));

    let bad_policy = s2st(&["sweep", "--manifest", path(&manifest), "--policy", "eager"]);
    assert!(!bad_policy.status.success());

    let too_long = s2st(&["sweep", "--manifest", path(&manifest), "--min-duration", "60", "--trace-dir", "."]);
    assert!(!too_long.status.success());
}

#[test]
fn missing_traces_are_reported_as_failures() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let csv = stdout(&s2st(&[
        "sweep",
        "--manifest",
        path(&dir.path().join("manifest.tsv")),
        "--trace-dir",
        path(&dir.path().join("empty")),
        "--policy",
        "greedy",
        "--window",
        "1",
        "--format",
        "csv",
    ]));
    assert_eq!(csv.lines().nth(1), Some("Greedy (wait-k),1,,,,0,2"));
}
