//! `s2st`: run, sweep, score and record simultaneous speech-to-speech translation.

mod backends;
mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use s2st_core::policies::PolicyKind;

#[derive(Debug, Parser)]
#[command(name = "s2st", version, about = "Cascaded simultaneous speech-to-speech translation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Translate one utterance and print the transcript and its metrics.
    Run(RunArgs),
    /// Run every policy x window cell over a manifest and print the result table.
    Sweep(SweepArgs),
    /// Recompute BLEU / AL / AL_CA from saved run logs.
    Metrics(MetricsArgs),
    /// Drive an external model process and save one trace file per run.
    RecordTrace(RecordArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Trace,
    Process,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pace {
    /// Release audio at its natural rate and measure on the wall clock.
    Realtime,
    /// Feed audio as fast as the loop consumes it, on the simulated clock.
    Unpaced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TtsKind {
    Mock,
    Process,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Markdown,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Tab-separated manifest (id, audio_path, duration_seconds, source_text, reference_translation, language).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory relative audio paths are resolved against (default: the manifest's directory).
    #[arg(long)]
    pub audio_root: Option<PathBuf>,
    #[arg(long, default_value_t = 6.0)]
    pub min_duration: f64,
    #[arg(long, default_value_t = 75)]
    pub limit: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    /// Policy kinds: greedy, offline, cap, cp (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub policy: Vec<PolicyKind>,
    /// Confidence thresholds for cap.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    /// Edit-distance thresholds for cp.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum, default_value_t = BackendKind::Trace)]
    pub backend: BackendKind,
    /// Directory holding `<id>__w<window>__<policy>.trace.jsonl` files.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
    /// Command line of the model process for `--backend process` and `--tts process`.
    #[arg(long)]
    pub backend_cmd: Option<String>,
    #[arg(long, value_enum, default_value_t = TtsKind::Mock)]
    pub tts: TtsKind,
    /// Seconds of mock speech per character.
    #[arg(long, default_value_t = 0.06)]
    pub tts_rate: f64,
    /// Endpoint for `--tts remote`; the API key is read from S2ST_TTS_API_KEY.
    #[arg(long)]
    pub tts_url: Option<String>,
    #[arg(long, value_enum, default_value_t = Pace::Unpaced)]
    pub pace: Pace,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// WAV file to translate (alternative to --manifest with --id).
    #[arg(long, conflicts_with = "manifest")]
    pub audio: Option<PathBuf>,
    /// Manifest row to translate.
    #[arg(long)]
    pub id: Option<String>,
    /// Reference translation for scoring when using --audio.
    #[arg(long)]
    pub reference: Option<String>,
    /// Source language code passed to the backend when using --audio.
    #[arg(long, default_value = "")]
    pub language: String,
    #[arg(long, default_value_t = 1.0)]
    pub window: f64,
    #[arg(long, default_value = "greedy")]
    pub policy: PolicyKind,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Directory to write `<id>.runlog.jsonl` into.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub policies: PolicyArgs,
    /// Window sizes in seconds.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub window: Vec<f64>,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    pub format: Format,
    /// Directory for the report and per-cell run logs.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run utterances one at a time.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Run log files, or directories of `*.runlog.jsonl`.
    #[arg(required = true)]
    pub runlogs: Vec<PathBuf>,
    /// One reference per line, in the order of the run logs.
    #[arg(long, conflicts_with = "manifest")]
    pub references: Option<PathBuf>,
    /// Manifest to look references up by run log id.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub policies: PolicyArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub window: Vec<f64>,
    /// Command line of the model process.
    #[arg(long)]
    pub backend_cmd: String,
    /// Output directory for trace files.
    #[arg(long)]
    pub trace_dir: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::run(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Metrics(args) => commands::metrics(args),
        Command::RecordTrace(args) => commands::record_trace(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
