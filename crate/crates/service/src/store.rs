use axum::body::Bytes;
use hrir_tcn_core::eval::{build_session, Stimulus};

use crate::error::Result;

/// Pre-rendered stimuli and their WAV encodings. Immutable once built.
#[derive(Debug)]
pub struct StimulusStore {
    stimuli: Vec<Stimulus>,
    wavs: Vec<Bytes>,
}

impl StimulusStore {
    /// Fails unless every direction and HRTF type has a stimulus.
    pub fn new(stimuli: Vec<Stimulus>) -> Result<Self> {
        // a throwaway plan is the cheapest complete coverage check
        build_session("coverage-check", &stimuli, 1, 0)?;
        let wavs = stimuli
            .iter()
            .map(|s| s.wav().map(Bytes::from))
            .collect::<hrir_tcn_core::Result<Vec<_>>>()?;
        Ok(Self { stimuli, wavs })
    }

    pub fn stimuli(&self) -> &[Stimulus] {
        &self.stimuli
    }

    pub fn index_of(&self, stimulus_id: &str) -> Option<usize> {
        self.stimuli.iter().position(|s| s.stimulus_id == stimulus_id)
    }

    pub fn wav(&self, index: usize) -> Option<Bytes> {
        self.wavs.get(index).cloned()
    }
}
