use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;

pub const MANIFEST_COLUMNS: [&str; 6] =
    ["id", "audio_path", "duration_seconds", "source_text", "reference_translation", "language"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub audio_path: PathBuf,
    pub duration: f64,
    pub source_text: String,
    pub reference_translation: String,
    pub language: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ManifestLoad {
    pub entries: Vec<ManifestEntry>,
    /// Ids of rows skipped because their audio file does not exist.
    pub missing_audio: Vec<String>,
}

impl ManifestLoad {
    pub fn warning_count(&self) -> usize {
        self.missing_audio.len()
    }
}

/// Reads a tab-separated manifest with a header row. Relative audio paths are
/// resolved against `audio_root`, or the manifest's directory when absent.
pub fn load_manifest(path: impl AsRef<Path>, audio_root: Option<&Path>) -> Result<ManifestLoad, HarnessError> {
    let path = path.as_ref();
    let root =
        audio_root.map(Path::to_path_buf).unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
    let file = std::fs::File::open(path)?;
    parse_manifest(file, &root)
}

pub fn parse_manifest(reader: impl std::io::Read, audio_root: &Path) -> Result<ManifestLoad, HarnessError> {
    let mut load = ManifestLoad::default();
    for (line, entry) in parse_manifest_rows(reader, audio_root)? {
        if entry.audio_path.is_file() {
            load.entries.push(entry);
        } else {
            log::warn!("line {line}: audio file {} not found, skipping {}", entry.audio_path.display(), entry.id);
            load.missing_audio.push(entry.id);
        }
    }
    Ok(load)
}

/// Every data row with its line number, without checking that audio exists.
pub fn parse_manifest_rows(
    reader: impl std::io::Read,
    audio_root: &Path,
) -> Result<Vec<(usize, ManifestEntry)>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').quoting(false).has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| format_error(1, e.to_string()))?.clone();
    let mut columns = [0usize; 6];
    for (slot, name) in columns.iter_mut().zip(MANIFEST_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| format_error(1, format!("missing column {name:?}")))?;
    }
    let [c_id, c_audio, c_duration, c_source, c_reference, c_language] = columns;

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            format_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let duration: f64 = field(c_duration)
            .parse()
            .map_err(|_| format_error(line, format!("bad duration {:?}", field(c_duration))))?;
        if !(duration > 0.0) {
            return Err(format_error(line, format!("duration must be positive, got {duration}")));
        }
        let reference = field(c_reference);
        if reference.is_empty() {
            return Err(format_error(line, "empty reference_translation".into()));
        }
        let id = field(c_id).to_string();
        let audio = PathBuf::from(field(c_audio));
        let audio_path = if audio.is_absolute() { audio } else { audio_root.join(audio) };
        rows.push((
            line,
            ManifestEntry {
                id,
                audio_path,
                duration,
                source_text: field(c_source).to_string(),
                reference_translation: reference.to_string(),
                language: field(c_language).to_string(),
            },
        ));
    }
    Ok(rows)
}

fn format_error(line: usize, message: String) -> HarnessError {
    HarnessError::Format { line, message }
}

/// Keeps entries at least `min_duration` long, then deterministically picks
/// `limit` of them: sort by id, shuffle with `seed`, take the first `limit`.
/// The selection is returned sorted by id, which makes filtering idempotent.
pub fn filter_entries(entries: &[ManifestEntry], min_duration: f64, limit: usize, seed: u64) -> Vec<ManifestEntry> {
    let mut survivors: Vec<ManifestEntry> = entries.iter().filter(|e| e.duration >= min_duration).cloned().collect();
    if survivors.len() < limit {
        log::warn!("only {} entries of at least {min_duration}s, fewer than the limit {limit}", survivors.len());
    }
    survivors.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    survivors.shuffle(&mut rng);
    survivors.truncate(limit);
    survivors.sort_by(|a, b| a.id.cmp(&b.id));
    survivors
}
