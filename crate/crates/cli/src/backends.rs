use std::sync::Arc;

use anyhow::{bail, Context, Result};
use s2st_core::backends::{
    trace_load, BackendError, MockSynthesizer, ProcessClient, ProcessSynthesizer, ProcessTranslator, RemoteSynthesizer,
    RemoteTtsConfig,
};
use s2st_core::harness::{trace_file_name, ManifestEntry, SynthesizerBox, TranslatorBox};
use s2st_core::PolicyConfig;

use crate::{BackendArgs, BackendKind, Pace, TtsKind};

/// Backend factories built once from the command-line flags.
pub struct Backends<'a> {
    args: &'a BackendArgs,
    client: Option<Arc<ProcessClient>>,
}

impl<'a> Backends<'a> {
    pub fn new(args: &'a BackendArgs) -> Result<Self> {
        let needs_process = args.backend == BackendKind::Process || args.tts == TtsKind::Process;
        let client = if needs_process {
            let cmd = args.backend_cmd.as_deref().context("--backend-cmd is required for the process backend")?;
            Some(Arc::new(ProcessClient::spawn_command_line(cmd)?))
        } else {
            None
        };
        if args.backend == BackendKind::Trace && args.trace_dir.is_none() {
            bail!("--trace-dir is required for the trace backend");
        }
        if args.tts == TtsKind::Remote {
            // fail early on a missing key rather than once per utterance
            RemoteSynthesizer::from_env(self::remote_config(args)?)?;
        }
        Ok(Self { args, client })
    }

    pub fn translator(
        &self,
        entry: &ManifestEntry,
        window: f64,
        policy: &PolicyConfig,
    ) -> Result<TranslatorBox, BackendError> {
        match self.args.backend {
            BackendKind::Trace => {
                let dir = self.args.trace_dir.as_ref().expect("checked in new");
                let backend = trace_load(dir.join(trace_file_name(&entry.id, window, policy)))?;
                Ok(Box::new(backend.sleep_for_compute(self.args.pace == Pace::Realtime)))
            }
            BackendKind::Process => Ok(Box::new(ProcessTranslator::new(self.client.clone().expect("spawned in new")))),
        }
    }

    pub fn synthesizer(&self) -> Result<SynthesizerBox, BackendError> {
        match self.args.tts {
            TtsKind::Mock => Ok(Box::new(MockSynthesizer::new(self.args.tts_rate))),
            TtsKind::Process => Ok(Box::new(ProcessSynthesizer::new(self.client.clone().expect("spawned in new")))),
            TtsKind::Remote => {
                let config = remote_config(self.args).map_err(|e| BackendError::Config(e.to_string()))?;
                Ok(Box::new(RemoteSynthesizer::from_env(config)?))
            }
        }
    }
}

fn remote_config(args: &BackendArgs) -> Result<RemoteTtsConfig> {
    let url = args.tts_url.as_deref().context("--tts-url is required for remote synthesis")?;
    Ok(RemoteTtsConfig::new(url))
}
