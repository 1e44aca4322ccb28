//! Mono PCM audio: chunks, whole-utterance sources, the frame buffer, and WAV ingestion.
//!
//! All offsets and durations are in seconds of source audio. Chunk timing is
//! derived from sample counts so that repeated slicing never accumulates drift.

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

/// Canonical sample rate used on the backend wire.
pub const CANONICAL_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error, PartialEq)]
pub enum AudioError {
    #[error("chunk at {found:.6}s is not contiguous with buffer tail at {expected:.6}s")]
    NotContiguous { expected: f64, found: f64 },
    #[error("sample rate mismatch: buffer is {expected} Hz, chunk is {found} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },
    #[error("invalid audio chunk: {0}")]
    InvalidChunk(String),
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("failed to read WAV file: {0}")]
    Wav(String),
}

/// A contiguous piece of a mono stream.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioChunk {
    samples: Arc<[f32]>,
    sample_rate: u32,
    start_offset: f64,
}

impl AudioChunk {
    pub fn new(samples: impl Into<Arc<[f32]>>, sample_rate: u32, start_offset: f64) -> Result<Self, AudioError> {
        let samples = samples.into();
        if sample_rate == 0 {
            return Err(AudioError::InvalidChunk("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(AudioError::InvalidChunk("chunk has no samples".into()));
        }
        if !(start_offset >= 0.0) || !start_offset.is_finite() {
            return Err(AudioError::InvalidChunk(format!("bad start offset {start_offset}")));
        }
        Ok(Self { samples, sample_rate, start_offset })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn start_offset(&self) -> f64 {
        self.start_offset
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn end_offset(&self) -> f64 {
        self.start_offset + self.duration()
    }
}

/// A whole utterance held in memory, before slicing into chunks.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSource {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioSource {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        Self { samples, sample_rate }
    }

    /// Silence of the given length at the canonical rate.
    pub fn silence(seconds: f64) -> Self {
        let n = (seconds * CANONICAL_SAMPLE_RATE as f64).round() as usize;
        Self::new(vec![0.0; n], CANONICAL_SAMPLE_RATE)
    }

    pub fn duration(&self) -> f64 {
        if self.sample_rate == 0 {
            return 0.0;
        }
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Linear-interpolation resampling. Returns a clone when the rate already matches.
    pub fn resample(&self, target_rate: u32) -> AudioSource {
        if self.sample_rate == target_rate || self.samples.is_empty() {
            return AudioSource::new(self.samples.clone(), target_rate.max(1));
        }
        let ratio = self.sample_rate as f64 / target_rate as f64;
        let out_len = ((self.samples.len() as f64) / ratio).round().max(1.0) as usize;
        let last = self.samples.len() - 1;
        let samples = (0..out_len)
            .map(|i| {
                let pos = i as f64 * ratio;
                let lo = (pos.floor() as usize).min(last);
                let hi = (lo + 1).min(last);
                let frac = (pos - lo as f64) as f32;
                self.samples[lo] * (1.0 - frac) + self.samples[hi] * frac
            })
            .collect();
        AudioSource::new(samples, target_rate)
    }
}

/// Accumulated source audio not yet consumed by a committed emission.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameBuffer {
    chunks: Vec<AudioChunk>,
    committed_upto: f64,
}

impl FrameBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Empty buffer whose first chunk must start at `committed_upto`.
    pub fn starting_at(committed_upto: f64) -> Self {
        Self { chunks: Vec::new(), committed_upto }
    }

    pub fn chunks(&self) -> &[AudioChunk] {
        &self.chunks
    }

    pub fn committed_upto(&self) -> f64 {
        self.committed_upto
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.chunks.iter().map(AudioChunk::duration).sum()
    }

    /// Source time at the end of the buffered audio.
    pub fn end_offset(&self) -> f64 {
        self.chunks.last().map_or(self.committed_upto, AudioChunk::end_offset)
    }

    /// Appends a chunk that must continue the buffer tail within one sample period.
    pub fn append(&mut self, chunk: AudioChunk) -> Result<(), AudioError> {
        if let Some(first) = self.chunks.first() {
            if first.sample_rate() != chunk.sample_rate() {
                return Err(AudioError::SampleRateMismatch {
                    expected: first.sample_rate(),
                    found: chunk.sample_rate(),
                });
            }
        }
        let expected = self.end_offset();
        let tolerance = 1.0 / chunk.sample_rate() as f64;
        if (chunk.start_offset() - expected).abs() > tolerance {
            return Err(AudioError::NotContiguous { expected, found: chunk.start_offset() });
        }
        self.chunks.push(chunk);
        Ok(())
    }

    /// Drops all buffered audio and advances `committed_upto` past it.
    /// Returns the cleared duration.
    pub fn clear(&mut self) -> f64 {
        let cleared = self.duration();
        if !self.chunks.is_empty() {
            self.committed_upto += cleared;
            self.chunks.clear();
        }
        cleared
    }

    /// All buffered samples concatenated.
    pub fn samples(&self) -> Vec<f32> {
        concat_samples(&self.chunks)
    }
}

pub fn concat_samples(chunks: &[AudioChunk]) -> Vec<f32> {
    let mut out = Vec::with_capacity(chunks.iter().map(|c| c.samples().len()).sum());
    for chunk in chunks {
        out.extend_from_slice(chunk.samples());
    }
    out
}

/// Reads a mono 16-bit PCM WAV file, normalizes to [-1, 1] and resamples to 16 kHz.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioSource, AudioError> {
    let reader = hound::WavReader::open(path.as_ref()).map_err(|e| AudioError::Wav(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(AudioError::UnsupportedFormat(format!("{} channels, expected mono", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(AudioError::UnsupportedFormat(format!(
            "{}-bit {:?}, expected 16-bit PCM",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(pcm16_to_f32))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| AudioError::Wav(e.to_string()))?;
    Ok(AudioSource::new(samples, spec.sample_rate).resample(CANONICAL_SAMPLE_RATE))
}

/// Writes a mono 16-bit PCM WAV file.
pub fn write_wav(path: impl AsRef<Path>, source: &AudioSource) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: source.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec).map_err(|e| AudioError::Wav(e.to_string()))?;
    for &s in &source.samples {
        writer.write_sample(f32_to_pcm16(s)).map_err(|e| AudioError::Wav(e.to_string()))?;
    }
    writer.finalize().map_err(|e| AudioError::Wav(e.to_string()))
}

pub fn pcm16_to_f32(s: i16) -> f32 {
    s as f32 / 32768.0
}

pub fn f32_to_pcm16(s: f32) -> i16 {
    (s.clamp(-1.0, 1.0) * 32767.0).round() as i16
}

/// Little-endian 16-bit PCM bytes, as sent on the backend wire.
pub fn encode_pcm16_le(samples: &[f32]) -> Vec<u8> {
    samples.iter().flat_map(|&s| f32_to_pcm16(s).to_le_bytes()).collect()
}

pub fn decode_pcm16_le(bytes: &[u8]) -> Vec<f32> {
    bytes.chunks_exact(2).map(|b| pcm16_to_f32(i16::from_le_bytes([b[0], b[1]]))).collect()
}
