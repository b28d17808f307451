use std::sync::Arc;

use rand::Rng;

use super::policy::stream_rng;
use super::{ChannelAgent, StepTelemetry};
use crate::env::{HopOutcome, SpectrumWaterfall};
use crate::error::{Error, Result};

/// Pseudo-random frequency hopping over a seeded i.i.d. uniform sequence.
#[derive(Debug, Clone)]
pub struct RandomFh {
    sequence: Vec<usize>,
    hop: u64,
}

impl RandomFh {
    pub const DEFAULT_LENGTH: usize = 1021;

    pub fn new(channels: usize, length: usize, seed: u64) -> Result<Self> {
        if length == 0 {
            return Err(Error::config("agent.sequence_length", "must be at least 1"));
        }
        let mut rng = stream_rng(seed, super::STREAM_POLICY);
        let sequence = (0..length).map(|_| rng.random_range(0..channels)).collect();
        Ok(RandomFh { sequence, hop: 0 })
    }

    pub fn channel_at(&self, hop: u64) -> usize {
        self.sequence[(hop % self.sequence.len() as u64) as usize]
    }

    pub fn sequence(&self) -> &[usize] {
        &self.sequence
    }
}

impl ChannelAgent for RandomFh {
    fn act(&mut self, _state: &Arc<SpectrumWaterfall>) -> Result<usize> {
        let c = self.channel_at(self.hop);
        self.hop += 1;
        Ok(c)
    }

    fn observe(
        &mut self,
        _state: &Arc<SpectrumWaterfall>,
        _action: usize,
        _outcome: &HopOutcome,
        _hop: u64,
    ) -> Result<StepTelemetry> {
        Ok(StepTelemetry::default())
    }
}
