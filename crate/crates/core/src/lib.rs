//! Cascaded simultaneous speech-to-speech translation.
//!
//! An offline speech-translation model is queried repeatedly over a growing
//! buffer of source audio; a policy decides after each query whether the
//! candidate translation is spoken (committed, synthesized, buffer cleared) or
//! discarded while more audio arrives. The crate also provides the evaluation
//! side: corpus BLEU on the spoken transcript, (computation-aware) Average
//! Lagging derived from run logs, and a policy × window sweep harness.

// `!(x >= 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod backends;
pub mod harness;
pub mod metrics;
pub mod pipeline;
pub mod policies;
pub mod transcript;

pub use audio::{AudioChunk, AudioSource, FrameBuffer};
pub use backends::{SpeechSynthesizer, SpeechTranslator};
pub use pipeline::{run, PipelineConfig, RunLog, RunOutput};
pub use policies::{decide, Action, PolicyConfig, PolicyDecision, PolicyInput};
pub use transcript::{Hypothesis, Transcript, TranscriptSegment};
