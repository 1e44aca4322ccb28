use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{HarnessError, ManifestEntry, ReportRow};
use crate::audio::{read_wav, AudioSource};
use crate::backends::{
    write_trace, BackendError, MockSynthesizer, RecordingTranslator, SpeechSynthesizer, SpeechTranslator,
};
use crate::metrics::{average_lagging, corpus_bleu, delays_from_log, LatencyMode};
use crate::pipeline::{self, ClockKind, Pacing, PipelineConfig, RunLog};
use crate::policies::PolicyConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub windows: Vec<f64>,
    pub policies: Vec<PolicyConfig>,
    pub min_duration: f64,
    pub limit: usize,
    pub seed: u64,
    pub pacing: Pacing,
    pub clock: ClockKind,
    /// Run the utterances of a cell concurrently.
    pub parallel: bool,
}

impl SweepSpec {
    /// The full grid of the evaluation: six policies over 1 s and 2 s windows,
    /// utterances of at least 6 s, 75 examples.
    pub fn table_one() -> Self {
        Self {
            windows: vec![1.0, 2.0],
            policies: vec![
                PolicyConfig::ConfidenceAware { gamma: 0.9 },
                PolicyConfig::ConfidenceAware { gamma: 0.5 },
                PolicyConfig::Consensus { alpha: 0.75 },
                PolicyConfig::Consensus { alpha: 0.5 },
                PolicyConfig::Greedy,
                PolicyConfig::Offline,
            ],
            min_duration: 6.0,
            limit: 75,
            seed: 0,
            pacing: Pacing::Unpaced,
            clock: ClockKind::Simulated,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.windows.is_empty() || self.policies.is_empty() {
            return Err(HarnessError::InvalidSpec("windows and policies must be non-empty".into()));
        }
        if self.limit == 0 {
            return Err(HarnessError::InvalidSpec("limit must be at least 1".into()));
        }
        if self.min_duration < 0.0 {
            return Err(HarnessError::InvalidSpec("min_duration must be non-negative".into()));
        }
        for &w in &self.windows {
            self.pipeline_config(w, PolicyConfig::Greedy, "")
                .validate()
                .map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
        }
        Ok(())
    }

    pub fn pipeline_config(&self, window: f64, policy: PolicyConfig, language: &str) -> PipelineConfig {
        PipelineConfig {
            window_seconds: window,
            policy,
            pacing: self.pacing,
            source_language: language.to_string(),
            clock: self.clock,
            tts_retries: 2,
        }
    }
}

/// Trace file name for one (utterance, window, policy) recording.
pub fn trace_file_name(id: &str, window_seconds: f64, policy: &PolicyConfig) -> String {
    format!("{id}__w{window_seconds}__{}.trace.jsonl", policy.slug())
}

/// Directory name for the run logs of one cell.
pub fn cell_dir_name(window_seconds: f64, policy: &PolicyConfig) -> String {
    format!("{}__w{window_seconds}", policy.slug())
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceRun {
    pub id: String,
    pub result: Result<RunLog, String>,
    pub transcript: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRuns {
    pub policy: PolicyConfig,
    pub window_seconds: f64,
    pub runs: Vec<UtteranceRun>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<ReportRow>,
    pub cells: Vec<CellRuns>,
}

impl SweepOutcome {
    /// Writes `<out>/<cell>/<id>.runlog.jsonl` for every completed run.
    pub fn write_run_logs(&self, out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        let mut written = Vec::new();
        for cell in &self.cells {
            let dir = out.join(cell_dir_name(cell.window_seconds, &cell.policy));
            std::fs::create_dir_all(&dir)?;
            for run in &cell.runs {
                if let Ok(log) = &run.result {
                    let path = dir.join(format!("{}.runlog.jsonl", run.id));
                    log.write_jsonl(&path)?;
                    written.push(path);
                }
            }
        }
        Ok(written)
    }
}

pub type TranslatorBox = Box<dyn SpeechTranslator + Send>;
pub type SynthesizerBox = Box<dyn SpeechSynthesizer + Send>;

fn load_sources(entries: &[ManifestEntry]) -> Vec<Result<AudioSource, String>> {
    entries
        .par_iter()
        .map(|e| read_wav(&e.audio_path).map_err(|err| format!("{}: {err}", e.audio_path.display())))
        .collect()
}

/// Runs every (policy, window) cell over all entries and aggregates one row per cell.
pub fn run_sweep<SF, TF>(
    entries: &[ManifestEntry],
    spec: &SweepSpec,
    st_factory: SF,
    tts_factory: TF,
) -> Result<SweepOutcome, HarnessError>
where
    SF: Fn(&ManifestEntry, f64, &PolicyConfig) -> Result<TranslatorBox, BackendError> + Sync,
    TF: Fn(&ManifestEntry) -> Result<SynthesizerBox, BackendError> + Sync,
{
    spec.validate()?;
    let sources = load_sources(entries);
    let mut rows = Vec::new();
    let mut cells = Vec::new();

    for policy in &spec.policies {
        for &window in &spec.windows {
            let run_one = |(entry, source): (&ManifestEntry, &Result<AudioSource, String>)| -> UtteranceRun {
                let result = source.clone().and_then(|source| {
                    let mut st = st_factory(entry, window, policy).map_err(|e| e.to_string())?;
                    let mut tts = tts_factory(entry).map_err(|e| e.to_string())?;
                    let config = spec.pipeline_config(window, *policy, &entry.language);
                    pipeline::run(&source, &config, &mut st, &mut tts).map_err(|f| f.to_string())
                });
                match result {
                    Ok(out) => UtteranceRun {
                        id: entry.id.clone(),
                        transcript: out.transcript.full_text(),
                        result: Ok(out.log),
                    },
                    Err(e) => {
                        log::warn!("{} / {} / {window}s failed: {e}", entry.id, policy.label());
                        UtteranceRun { id: entry.id.clone(), transcript: String::new(), result: Err(e) }
                    }
                }
            };
            let runs: Vec<UtteranceRun> = if spec.parallel {
                entries.par_iter().zip(sources.par_iter()).map(run_one).collect()
            } else {
                entries.iter().zip(sources.iter()).map(run_one).collect()
            };
            rows.push(aggregate(policy, window, entries, &runs));
            cells.push(CellRuns { policy: *policy, window_seconds: window, runs });
        }
    }
    Ok(SweepOutcome { rows, cells })
}

struct Completed<'a> {
    hypothesis: &'a str,
    reference: &'a str,
    al: f64,
    al_ca: f64,
}

fn aggregate(policy: &PolicyConfig, window: f64, entries: &[ManifestEntry], runs: &[UtteranceRun]) -> ReportRow {
    let mut failures = 0;
    let mut completed = Vec::new();
    for (entry, run) in entries.iter().zip(runs) {
        let Ok(log) = &run.result else {
            failures += 1;
            continue;
        };
        let reference = entry.reference_translation.as_str();
        let lag = |mode| delays_from_log(log, mode, reference).map(|d| average_lagging(&d));
        match (lag(LatencyMode::SourceTime), lag(LatencyMode::ComputationAware)) {
            (Ok(al), Ok(al_ca)) => completed.push(Completed { hypothesis: &run.transcript, reference, al, al_ca }),
            _ => failures += 1,
        }
    }
    let n = completed.len();
    let (bleu, al, al_ca) = if n == 0 {
        (None, None, None)
    } else {
        let hyps: Vec<&str> = completed.iter().map(|c| c.hypothesis).collect();
        let refs: Vec<&str> = completed.iter().map(|c| c.reference).collect();
        let bleu = corpus_bleu(&hyps, &refs).ok().map(|s| s.score);
        let mean = |f: fn(&Completed) -> f64| completed.iter().map(f).sum::<f64>() / n as f64;
        (bleu, Some(mean(|c| c.al)), Some(mean(|c| c.al_ca)))
    };
    ReportRow {
        policy_label: policy.label(),
        window_seconds: window,
        bleu,
        al_seconds: al,
        al_ca_seconds: al_ca,
        n_examples: n,
        failures,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordSummary {
    pub written: Vec<PathBuf>,
    /// (trace file name, error) for runs that could not be recorded.
    pub failures: Vec<(String, String)>,
}

/// Drives a live backend through the pipeline on the simulated clock and
/// writes one trace file per (utterance, window, policy) into `out_dir`.
pub fn record_traces<SF>(
    entries: &[ManifestEntry],
    windows: &[f64],
    policies: &[PolicyConfig],
    out_dir: &Path,
    comment: Option<&str>,
    st_factory: SF,
) -> Result<RecordSummary, HarnessError>
where
    SF: Fn(&ManifestEntry) -> Result<TranslatorBox, BackendError>,
{
    std::fs::create_dir_all(out_dir)?;
    let mut summary = RecordSummary::default();
    for (entry, source) in entries.iter().zip(load_sources(entries)) {
        for policy in policies {
            for &window in windows {
                let name = trace_file_name(&entry.id, window, policy);
                let recorded = source.clone().and_then(|source| {
                    let mut rec = RecordingTranslator::new(st_factory(entry).map_err(|e| e.to_string())?);
                    let config = PipelineConfig::simulated(window, *policy).with_language(&entry.language);
                    pipeline::run(&source, &config, &mut rec, &mut MockSynthesizer::default())
                        .map_err(|f| f.to_string())?;
                    Ok(rec.into_parts().1)
                });
                match recorded {
                    Ok(trace) => {
                        let path = out_dir.join(&name);
                        write_trace(&path, &trace, comment)?;
                        summary.written.push(path);
                    }
                    Err(e) => summary.failures.push((name, e)),
                }
            }
        }
    }
    Ok(summary)
}
