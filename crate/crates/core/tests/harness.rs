mod common;

use std::path::Path;

use common::*;
use s2st_core::backends::{trace_load, MockSynthesizer};
use s2st_core::harness::{
    cell_dir_name, emit_report, load_manifest, parse_csv_report, record_traces, run_sweep, trace_file_name,
    ManifestEntry, ReportFormat, SweepOutcome, SweepSpec, SynthesizerBox, TranslatorBox,
};
use s2st_core::pipeline::RunLog;
use s2st_core::PolicyConfig;

fn model_for(entry: &ManifestEntry) -> SyntheticModel {
    SyntheticModel::new(&entry.reference_translation, entry.duration)
}

fn record(entries: &[ManifestEntry], spec: &SweepSpec, dir: &Path) {
    let summary = record_traces(entries, &spec.windows, &spec.policies, dir, Some("synthetic model"), |e| {
        Ok(Box::new(model_for(e)) as TranslatorBox)
    })
    .unwrap();
    assert!(summary.failures.is_empty(), "{:?}", summary.failures);
    assert_eq!(summary.written.len(), entries.len() * spec.windows.len() * spec.policies.len());
}

fn replay(entries: &[ManifestEntry], spec: &SweepSpec, dir: &Path) -> SweepOutcome {
    run_sweep(
        entries,
        spec,
        |e, w, p| Ok(Box::new(trace_load(dir.join(trace_file_name(&e.id, w, p)))?) as TranslatorBox),
        |_| Ok(Box::new(MockSynthesizer::default()) as SynthesizerBox),
    )
    .unwrap()
}

fn small_spec() -> SweepSpec {
    SweepSpec { min_duration: 0.0, ..SweepSpec::table_one() }
}

#[test]
fn recorded_sweep_has_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let entries = synthetic_corpus(dir.path());
    let spec = small_spec();
    record(&entries, &spec, &dir.path().join("traces"));
    let outcome = replay(&entries, &spec, &dir.path().join("traces"));

    assert_eq!(outcome.rows.len(), 12);
    for row in &outcome.rows {
        assert_eq!((row.n_examples, row.failures), (5, 0), "{row:?}");
        assert!(row.al_ca_seconds.unwrap() + 1e-9 >= row.al_seconds.unwrap());
    }
    let row =
        |label: &str, w: f64| outcome.rows.iter().find(|r| r.policy_label == label && r.window_seconds == w).unwrap();
    assert_eq!(row("Offline", 1.0).bleu, row("Offline", 2.0).bleu);
    assert_eq!(row("Offline", 1.0).bleu, Some(100.0));
    for w in [1.0, 2.0] {
        assert!(row("Greedy (wait-k)", w).al_seconds.unwrap() <= row("Offline", w).al_seconds.unwrap());
    }

    let md = emit_report(&outcome.rows, ReportFormat::Markdown);
    assert!(md.contains("\n| Window Size (t) | 1s | 2s |\n"), "{md}");
    assert!(md.contains("| Offline | 100.0 ("), "{md}");
}

#[test]
fn sweep_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let entries = synthetic_corpus(dir.path());
    let spec = small_spec();
    record(&entries, &spec, &dir.path().join("traces"));
    let a = replay(&entries, &spec, &dir.path().join("traces"));
    let b = replay(&entries, &SweepSpec { parallel: false, ..spec.clone() }, &dir.path().join("traces"));
    for format in [ReportFormat::Csv, ReportFormat::Markdown] {
        assert_eq!(emit_report(&a.rows, format), emit_report(&b.rows, format));
    }
    let parsed = parse_csv_report(&emit_report(&a.rows, ReportFormat::Csv)).unwrap();
    assert_eq!(parsed.len(), a.rows.len());
    for (p, r) in parsed.iter().zip(&a.rows) {
        assert_eq!(p.policy_label, r.policy_label);
        assert!((p.bleu.unwrap() - r.bleu.unwrap()).abs() < 1e-6);
    }
}

#[test]
fn cells_do_not_share_backends() {
    let dir = tempfile::tempdir().unwrap();
    let entries = synthetic_corpus(dir.path());
    let spec = SweepSpec {
        policies: vec![PolicyConfig::Greedy, PolicyConfig::Offline],
        windows: vec![1.0, 2.0],
        ..small_spec()
    };
    record(&entries, &spec, &dir.path().join("traces"));
    // swap the greedy and offline traces for one utterance: the replay must diverge, not mix
    let traces = dir.path().join("traces");
    let greedy = traces.join(trace_file_name("utt0", 1.0, &PolicyConfig::Greedy));
    let offline = traces.join(trace_file_name("utt0", 1.0, &PolicyConfig::Offline));
    let tmp = traces.join("swap");
    std::fs::rename(&greedy, &tmp).unwrap();
    std::fs::rename(&offline, &greedy).unwrap();
    std::fs::rename(&tmp, &offline).unwrap();

    let outcome = replay(&entries, &spec, &traces);
    for cell in &outcome.cells {
        let utt0 = cell.runs.iter().find(|r| r.id == "utt0").unwrap();
        let swapped = cell.window_seconds == 1.0;
        assert_eq!(utt0.result.is_err(), swapped, "{} w={}", cell.policy, cell.window_seconds);
        if swapped {
            assert!(utt0.result.as_ref().unwrap_err().contains("diverge"), "{:?}", utt0.result);
        }
    }
    let row = outcome.rows.iter().find(|r| r.policy_label == "Offline" && r.window_seconds == 1.0).unwrap();
    assert_eq!((row.n_examples, row.failures), (4, 1));
}

#[test]
fn missing_traces_count_as_failures() {
    let dir = tempfile::tempdir().unwrap();
    let entries = synthetic_corpus(dir.path());
    let spec = SweepSpec { policies: vec![PolicyConfig::Greedy], windows: vec![1.0], ..small_spec() };
    let outcome = replay(&entries, &spec, &dir.path().join("nowhere"));
    let row = &outcome.rows[0];
    assert_eq!((row.n_examples, row.failures), (0, 5));
    assert_eq!(row.bleu, None);
    assert!(emit_report(&outcome.rows, ReportFormat::Markdown).contains("| Greedy (wait-k) | — |"));
}

#[test]
fn run_logs_are_written_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let entries = synthetic_corpus(dir.path());
    let spec = SweepSpec { policies: vec![PolicyConfig::consensus(0.5).unwrap()], windows: vec![2.0], ..small_spec() };
    record(&entries, &spec, &dir.path().join("traces"));
    let outcome = replay(&entries, &spec, &dir.path().join("traces"));
    let out = dir.path().join("out");
    let written = outcome.write_run_logs(&out).unwrap();
    assert_eq!(written.len(), 5);
    let path = out.join(cell_dir_name(2.0, &spec.policies[0])).join("utt3.runlog.jsonl");
    let log = RunLog::read_jsonl(&path).unwrap();
    assert!(log.is_complete());
    assert_eq!(&log, outcome.cells[0].runs[3].result.as_ref().unwrap());
}

#[test]
fn manifest_round_trip_with_filtering() {
    let dir = tempfile::tempdir().unwrap();
    let entries = synthetic_corpus(dir.path());
    let mut tsv = String::from("id\taudio_path\tduration_seconds\tsource_text\treference_translation\tlanguage\n");
    for e in &entries {
        tsv.push_str(&format!(
            "{}\t{}\t{}\tfuente\t{}\tes\n",
            e.id,
            e.audio_path.file_name().unwrap().to_str().unwrap(),
            e.duration,
            e.reference_translation
        ));
    }
    tsv.push_str("ghost\tghost.wav\t7.0\tx\ty\tes\n");
    let manifest = dir.path().join("manifest.tsv");
    std::fs::write(&manifest, tsv).unwrap();
    let loaded = load_manifest(&manifest, Some(dir.path())).unwrap();
    assert_eq!(loaded.entries.len(), 5);
    assert_eq!(loaded.warning_count(), 1);
    let kept = s2st_core::harness::filter_entries(&loaded.entries, 6.5, 3, 11);
    assert_eq!(kept.len(), 3);
    assert!(kept.iter().all(|e| e.duration >= 6.5));
    assert_eq!(kept, s2st_core::harness::filter_entries(&kept, 6.5, 3, 11));
}
