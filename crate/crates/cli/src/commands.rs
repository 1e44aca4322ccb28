use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use s2st_core::audio::read_wav;
use s2st_core::backends::{ProcessClient, ProcessTranslator};
use s2st_core::harness::{
    emit_report, filter_entries, load_manifest, parse_manifest_rows, record_traces, run_sweep, ManifestEntry,
    ReportFormat, SweepSpec, TranslatorBox,
};
use s2st_core::metrics::evaluate_logs;
use s2st_core::pipeline::{self, ClockKind, Pacing, PipelineConfig, RunLog};
use s2st_core::policies::PolicyKind;
use s2st_core::PolicyConfig;

use crate::backends::Backends;
use crate::{DataArgs, Format, MetricsArgs, Pace, PolicyArgs, RecordArgs, RunArgs, SweepArgs};

const DEFAULT_GAMMAS: [f64; 2] = [0.9, 0.5];
const DEFAULT_ALPHAS: [f64; 2] = [0.75, 0.5];
const RUNLOG_SUFFIX: &str = ".runlog.jsonl";

/// One config per kind, with cap and cp repeated for every threshold.
/// No kinds means the full evaluation grid.
pub fn expand_policies(args: &PolicyArgs) -> Result<Vec<PolicyConfig>> {
    let kinds = if args.policy.is_empty() {
        vec![PolicyKind::ConfidenceAware, PolicyKind::Consensus, PolicyKind::Greedy, PolicyKind::Offline]
    } else {
        args.policy.clone()
    };
    let gammas = if args.gamma.is_empty() { DEFAULT_GAMMAS.to_vec() } else { args.gamma.clone() };
    let alphas = if args.alpha.is_empty() { DEFAULT_ALPHAS.to_vec() } else { args.alpha.clone() };
    if !args.gamma.is_empty() && !kinds.contains(&PolicyKind::ConfidenceAware) {
        log::warn!("--gamma given without the cap policy; ignored");
    }
    if !args.alpha.is_empty() && !kinds.contains(&PolicyKind::Consensus) {
        log::warn!("--alpha given without the cp policy; ignored");
    }
    let mut out = Vec::new();
    for kind in kinds {
        match kind {
            PolicyKind::ConfidenceAware => {
                for &g in &gammas {
                    out.push(PolicyConfig::from_parts(kind, Some(g), None)?);
                }
            }
            PolicyKind::Consensus => {
                for &a in &alphas {
                    out.push(PolicyConfig::from_parts(kind, None, Some(a))?);
                }
            }
            _ => out.push(PolicyConfig::from_parts(kind, None, None)?),
        }
    }
    out.dedup();
    Ok(out)
}

fn pace_modes(pace: Pace) -> (Pacing, ClockKind) {
    match pace {
        Pace::Realtime => (Pacing::Realtime, ClockKind::Wall),
        Pace::Unpaced => (Pacing::Unpaced, ClockKind::Simulated),
    }
}

fn load_entries(data: &DataArgs) -> Result<Vec<ManifestEntry>> {
    let manifest = data.manifest.as_ref().context("--manifest is required")?;
    let loaded = load_manifest(manifest, data.audio_root.as_deref())
        .with_context(|| format!("reading manifest {}", manifest.display()))?;
    for id in &loaded.missing_audio {
        log::warn!("skipping {id}: audio file not found");
    }
    let entries = filter_entries(&loaded.entries, data.min_duration, data.limit, data.seed);
    ensure!(!entries.is_empty(), "no manifest entries of at least {}s", data.min_duration);
    Ok(entries)
}

fn report_format(format: Format) -> ReportFormat {
    match format {
        Format::Csv => ReportFormat::Csv,
        Format::Markdown => ReportFormat::Markdown,
    }
}

fn single_entry(args: &RunArgs) -> Result<ManifestEntry> {
    if let Some(audio) = &args.audio {
        let source = read_wav(audio).with_context(|| format!("reading {}", audio.display()))?;
        let id = match &args.id {
            Some(id) => id.clone(),
            None => audio.file_stem().context("audio path has no file name")?.to_string_lossy().into_owned(),
        };
        return Ok(ManifestEntry {
            id,
            audio_path: audio.clone(),
            duration: source.duration(),
            source_text: String::new(),
            reference_translation: args.reference.clone().unwrap_or_default(),
            language: args.language.clone(),
        });
    }
    let manifest = args.data.manifest.as_ref().context("give --audio, or --manifest with --id")?;
    let id = args.id.as_deref().context("--id is required with --manifest")?;
    let loaded = load_manifest(manifest, args.data.audio_root.as_deref())?;
    loaded
        .entries
        .into_iter()
        .find(|e| e.id == id)
        .with_context(|| format!("no manifest row {id:?} with existing audio"))
}

pub fn run(args: RunArgs) -> Result<()> {
    let entry = single_entry(&args)?;
    let policy = PolicyConfig::from_parts(args.policy, args.gamma, args.alpha)?;
    let backends = Backends::new(&args.backend)?;
    let (pacing, clock) = pace_modes(args.backend.pace);
    let config = PipelineConfig {
        pacing,
        clock,
        ..PipelineConfig::simulated(args.window, policy).with_language(&entry.language)
    };
    let source = read_wav(&entry.audio_path).with_context(|| format!("reading {}", entry.audio_path.display()))?;
    let mut st = backends.translator(&entry, args.window, &policy)?;
    let mut tts = backends.synthesizer()?;
    let output = match pipeline::run(&source, &config, &mut st, &mut tts) {
        Ok(output) => output,
        Err(failure) => {
            if let Some(out) = &args.out {
                write_log(out, &entry.id, &failure.partial_log)?;
            }
            return Err(failure.error.into());
        }
    };
    if let Some(out) = &args.out {
        write_log(out, &entry.id, &output.log)?;
    }
    println!("{}", output.transcript.full_text());
    if !entry.reference_translation.trim().is_empty() {
        let report = evaluate_logs(std::slice::from_ref(&output.log), &[&entry.reference_translation])?;
        println!("{}", serde_json::to_string(&report)?);
    }
    Ok(())
}

fn write_log(out: &Path, id: &str, log: &RunLog) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let path = out.join(format!("{id}{RUNLOG_SUFFIX}"));
    log.write_jsonl(&path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let entries = load_entries(&args.data)?;
    let (pacing, clock) = pace_modes(args.backend.pace);
    let spec = SweepSpec {
        windows: args.window.clone(),
        policies: expand_policies(&args.policies)?,
        min_duration: args.data.min_duration,
        limit: args.data.limit,
        seed: args.data.seed,
        pacing,
        clock,
        parallel: !args.sequential,
    };
    let backends = Backends::new(&args.backend)?;
    let outcome = run_sweep(&entries, &spec, |e, w, p| backends.translator(e, w, p), |_| backends.synthesizer())?;
    let format = report_format(args.format);
    let report = emit_report(&outcome.rows, format);
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        let name = match format {
            ReportFormat::Csv => "report.csv",
            ReportFormat::Markdown => "report.md",
        };
        std::fs::write(out.join(name), &report)?;
        outcome.write_run_logs(out)?;
    }
    print!("{report}");
    let failures: usize = outcome.rows.iter().map(|r| r.failures).sum();
    if failures > 0 {
        log::warn!("{failures} runs failed; see the failures column");
    }
    Ok(())
}

fn collect_runlogs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.to_string_lossy().ends_with(RUNLOG_SUFFIX))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(path.clone());
        }
    }
    ensure!(!files.is_empty(), "no run logs found");
    Ok(files)
}

fn runlog_id(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.strip_suffix(RUNLOG_SUFFIX).unwrap_or(&name).to_string()
}

pub fn metrics(args: MetricsArgs) -> Result<()> {
    let files = collect_runlogs(&args.runlogs)?;
    let logs = files
        .iter()
        .map(|p| RunLog::read_jsonl(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let references: Vec<String> = if let Some(path) = &args.references {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        text.lines().map(str::to_string).collect()
    } else if let Some(manifest) = &args.manifest {
        // audio is not needed for scoring, so rows without it still count
        let file = std::fs::File::open(manifest).with_context(|| format!("reading {}", manifest.display()))?;
        let by_id: HashMap<String, String> = parse_manifest_rows(file, Path::new(""))?
            .into_iter()
            .map(|(_, e)| (e.id, e.reference_translation))
            .collect();
        files
            .iter()
            .map(|p| {
                let id = runlog_id(p);
                by_id.get(&id).cloned().with_context(|| format!("no reference for {id}"))
            })
            .collect::<Result<_>>()?
    } else {
        bail!("give --references or --manifest");
    };
    ensure!(references.len() == logs.len(), "{} run logs but {} references", logs.len(), references.len());
    let report = evaluate_logs(&logs, &references)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

pub fn record_trace(args: RecordArgs) -> Result<()> {
    let entries = load_entries(&args.data)?;
    let policies = expand_policies(&args.policies)?;
    let client = Arc::new(ProcessClient::spawn_command_line(&args.backend_cmd)?);
    let comment = format!("recorded with: {}", args.backend_cmd);
    let summary = record_traces(&entries, &args.window, &policies, &args.trace_dir, Some(&comment), |_| {
        Ok(Box::new(ProcessTranslator::new(client.clone())) as TranslatorBox)
    })?;
    for (name, error) in &summary.failures {
        log::error!("{name}: {error}");
    }
    println!("wrote {} trace files to {}", summary.written.len(), args.trace_dir.display());
    ensure!(summary.failures.is_empty(), "{} recordings failed", summary.failures.len());
    Ok(())
}
