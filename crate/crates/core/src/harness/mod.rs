//! Dataset ingestion, policy × window sweeps, and result tables.

mod manifest;
mod report;
mod sweep;

pub use manifest::{
    filter_entries, load_manifest, parse_manifest, parse_manifest_rows, ManifestEntry, ManifestLoad, MANIFEST_COLUMNS,
};
pub use report::{emit_report, format_cell, format_window, parse_csv_report, ReportFormat, ReportRow, CSV_COLUMNS};
pub use sweep::{
    cell_dir_name, record_traces, run_sweep, trace_file_name, CellRuns, RecordSummary, SweepOutcome, SweepSpec,
    SynthesizerBox, TranslatorBox, UtteranceRun,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Backend(#[from] crate::backends::BackendError),
    #[error(transparent)]
    RunLog(#[from] crate::pipeline::RunLogError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
