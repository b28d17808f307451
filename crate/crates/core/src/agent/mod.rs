//! User agents and their learning machinery.

mod baseline;
mod dqn;
mod joint;
mod memory;
mod params;
mod policy;
mod predictor;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, HopOutcome, SpectrumWaterfall};
use crate::error::Result;

pub use baseline::RandomFh;
pub use dqn::{DqnAgent, QLearner, QLearnerSettings};
pub use joint::{JointAgent, LambdaMode, LossStats};
pub use memory::{ReplayMemory, SampleLabelPair, Transition};
pub use params::AgentParams;
pub use policy::{
    aggregate_loss, argmax, argmin, epsilon_greedy, joint_decide, joint_scores, linear_epsilon,
    stream_rng, Normalizer,
};
pub use predictor::{CgPredictor, PredictorAgent};

pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_POLICY: u64 = 2;

/// Which coarse spectrum the predictor is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoarseLabel {
    /// Jamming plus noise; the user's own signal is left out.
    #[default]
    Interference,
    /// Everything received, the user's signal included.
    Total,
}

/// Geometry and input scaling of the observed waterfall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub rows: usize,
    pub bins: usize,
    pub channels: usize,
    pub normalizer: Normalizer,
}

impl Observation {
    /// Uses a 60 dB input span.
    pub fn of(env: &EnvConfig) -> Self {
        Observation::with_span(env, 60.0)
    }

    pub fn with_span(env: &EnvConfig, span_db: f64) -> Self {
        Observation {
            rows: env.history_slots,
            bins: env.spectrum_bins,
            channels: env.channels,
            normalizer: Normalizer {
                floor_db: env.noise_floor_bin_db(),
                span_db,
            },
        }
    }
}

/// Per-hop training telemetry.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepTelemetry {
    pub loss_q: Option<f64>,
    pub loss_c: Option<f64>,
    pub lambda: Option<f64>,
}

/// A user that picks one channel per hop and learns from the outcome.
pub trait ChannelAgent: Send {
    fn act(&mut self, state: &Arc<SpectrumWaterfall>) -> Result<usize>;

    /// `hop` counts completed hops from 1.
    fn observe(
        &mut self,
        state: &Arc<SpectrumWaterfall>,
        action: usize,
        outcome: &HopOutcome,
        hop: u64,
    ) -> Result<StepTelemetry>;
}
