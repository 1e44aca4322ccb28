use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// One (policy, window) cell of the result grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub policy_label: String,
    pub window_seconds: f64,
    pub bleu: Option<f64>,
    pub al_seconds: Option<f64>,
    pub al_ca_seconds: Option<f64>,
    pub n_examples: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(HarnessError::InvalidSpec(format!("unknown report format {other:?}"))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 7] =
    ["policy", "window_seconds", "bleu", "al_seconds", "al_ca_seconds", "n_examples", "failures"];

const MISSING_CELL: &str = "—";

/// `"38.3 (6.4)"`: BLEU with latency in parentheses, one decimal each.
pub fn format_cell(bleu: Option<f64>, latency: Option<f64>) -> String {
    match (bleu, latency) {
        (Some(b), Some(l)) => format!("{b:.1} ({l:.1})"),
        _ => MISSING_CELL.to_string(),
    }
}

pub fn format_window(seconds: f64) -> String {
    format!("{seconds}s")
}

pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => emit_csv(rows),
        ReportFormat::Markdown => emit_markdown(rows),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn emit_csv(rows: &[ReportRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.policy_label.clone(),
            r.window_seconds.to_string(),
            opt(r.bleu),
            opt(r.al_seconds),
            opt(r.al_ca_seconds),
            r.n_examples.to_string(),
            r.failures.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Policies as rows, windows as columns, cells as `BLEU (AL_CA)`, followed by
/// a flat table with every field.
fn emit_markdown(rows: &[ReportRow]) -> String {
    let mut policies: Vec<&str> = Vec::new();
    let mut windows: Vec<f64> = Vec::new();
    for r in rows {
        if !policies.contains(&r.policy_label.as_str()) {
            policies.push(&r.policy_label);
        }
        if !windows.contains(&r.window_seconds) {
            windows.push(r.window_seconds);
        }
    }

    let mut out = String::new();
    out.push_str("BLEU (computation-aware Average Lagging in seconds). ");
    out.push_str("AL is the arithmetic mean over utterances; tokens are whitespace-delimited.\n\n");
    out.push_str("| Window Size (t) |");
    for w in &windows {
        let _ = write!(out, " {} |", format_window(*w));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(windows.len()));
    out.push('\n');
    for p in &policies {
        let _ = write!(out, "| {p} |");
        for w in &windows {
            let cell = rows
                .iter()
                .find(|r| r.policy_label == *p && r.window_seconds == *w)
                .map_or_else(|| MISSING_CELL.to_string(), |r| format_cell(r.bleu, r.al_ca_seconds));
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
    }

    out.push_str("\n| policy | window | bleu | al | al_ca | n | failures |\n|---|---|---|---|---|---|---|\n");
    let fmt = |v: Option<f64>, digits: usize| v.map_or_else(|| MISSING_CELL.to_string(), |x| format!("{x:.digits$}"));
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.policy_label,
            format_window(r.window_seconds),
            fmt(r.bleu, 2),
            fmt(r.al_seconds, 3),
            fmt(r.al_ca_seconds, 3),
            r.n_examples,
            r.failures
        );
    }
    out
}

/// Parses CSV produced by [`emit_report`].
pub fn parse_csv_report(text: &str) -> Result<Vec<ReportRow>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| HarnessError::Format { line, message: e.to_string() })?;
        let bad = |what: &str| HarnessError::Format { line, message: format!("bad {what}") };
        let num = |idx: usize, what: &str| -> Result<Option<f64>, HarnessError> {
            let s = record.get(idx).ok_or_else(|| bad(what))?;
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(what))
            }
        };
        rows.push(ReportRow {
            policy_label: record.get(0).ok_or_else(|| bad("policy"))?.to_string(),
            window_seconds: num(1, "window_seconds")?.ok_or_else(|| bad("window_seconds"))?,
            bleu: num(2, "bleu")?,
            al_seconds: num(3, "al_seconds")?,
            al_ca_seconds: num(4, "al_ca_seconds")?,
            n_examples: record.get(5).and_then(|s| s.parse().ok()).ok_or_else(|| bad("n_examples"))?,
            failures: record.get(6).and_then(|s| s.parse().ok()).ok_or_else(|| bad("failures"))?,
        });
    }
    Ok(rows)
}
