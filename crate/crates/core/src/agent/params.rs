use serde::{Deserialize, Serialize};

use super::CoarseLabel;
use crate::error::{Error, Result};
use crate::nn::{Architecture, ConvSpec};

/// Learning hyper-parameters shared by the user agents and the intelligent jammer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentParams {
    pub architecture: Architecture,
    /// Learning rate of the Q side.
    pub alpha_q: f64,
    /// Learning rate of the prediction side.
    pub alpha_c: f64,
    pub batch_q: usize,
    pub batch_c: usize,
    pub memory_q: usize,
    pub memory_c: usize,
    /// Target network copy interval `N_u`, in hops.
    pub target_sync_hops: u64,
    pub gamma: f64,
    /// Random actions are taken while the prediction loss exceeds this value.
    pub explore_threshold: f64,
    /// Prediction loss assumed before the first training step.
    pub loss_init: f64,
    /// Scale factor used when the prediction loss is zero.
    pub lambda_max: f64,
    /// Added to every user reward before it enters the Q memory.
    pub reward_offset_db: f64,
    /// Multiplies the offset reward before it enters the Q memory.
    pub reward_scale: f64,
    /// Waterfall values map from the noise floor to `noise floor + input_span_db` onto `[0, 1]`.
    pub input_span_db: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Hops over which the plain DQN user decays epsilon.
    pub epsilon_decay_hops: u64,
    /// Training target of the coarse spectrum head.
    #[serde(default)]
    pub cg_label: CoarseLabel,
}

impl AgentParams {
    /// Q-memory reward for a hop with minimum SINR `sinr_db`.
    pub fn shaped_reward(&self, sinr_db: f64) -> f64 {
        (sinr_db + self.reward_offset_db) * self.reward_scale
    }

    /// Full-size network and hyper-parameters.
    pub fn paper() -> Self {
        AgentParams {
            architecture: Architecture::table(),
            alpha_q: 1e-4,
            alpha_c: 1e-4,
            batch_q: 64,
            batch_c: 64,
            memory_q: 1000,
            memory_c: 256,
            target_sync_hops: 1000,
            gamma: 0.1,
            explore_threshold: 10.0,
            loss_init: 100.0,
            lambda_max: 1e3,
            reward_offset_db: 30.0,
            reward_scale: 1.0,
            input_span_db: 60.0,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_hops: 5000,
            cg_label: CoarseLabel::Interference,
        }
    }

    /// A narrow network with small batches sized for a single CPU core.
    pub fn desk() -> Self {
        AgentParams {
            architecture: Architecture {
                conv1: ConvSpec {
                    kernel: 8,
                    stride: 4,
                    filters: 4,
                },
                conv2: ConvSpec {
                    kernel: 4,
                    stride: 2,
                    filters: 8,
                },
                fc1: 32,
                fc2: 32,
            },
            alpha_q: 1e-3,
            alpha_c: 1e-2,
            batch_q: 8,
            batch_c: 8,
            memory_q: 1000,
            memory_c: 256,
            target_sync_hops: 200,
            reward_scale: 1.0 / 60.0,
            ..AgentParams::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("agent.alpha_q", self.alpha_q),
            ("agent.alpha_c", self.alpha_c),
            ("agent.explore_threshold", self.explore_threshold),
            ("agent.loss_init", self.loss_init),
            ("agent.lambda_max", self.lambda_max),
            ("agent.input_span_db", self.input_span_db),
            ("agent.reward_scale", self.reward_scale),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        for (field, v) in [
            ("agent.batch_q", self.batch_q),
            ("agent.batch_c", self.batch_c),
            ("agent.memory_q", self.memory_q),
            ("agent.memory_c", self.memory_c),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if self.batch_q > self.memory_q {
            return Err(Error::config("agent.batch_q", "exceeds memory_q"));
        }
        if self.batch_c > self.memory_c {
            return Err(Error::config("agent.batch_c", "exceeds memory_c"));
        }
        if self.target_sync_hops == 0 {
            return Err(Error::config(
                "agent.target_sync_hops",
                "must be at least 1",
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(
                "agent.gamma",
                format!("must lie in (0, 1], got {}", self.gamma),
            ));
        }
        if !self.reward_offset_db.is_finite() {
            return Err(Error::config("agent.reward_offset_db", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return Err(Error::config(
                "agent.epsilon_start",
                "epsilons must lie in [0, 1]",
            ));
        }
        for (field, c) in [
            ("agent.architecture.conv1", self.architecture.conv1),
            ("agent.architecture.conv2", self.architecture.conv2),
        ] {
            if c.kernel == 0
                || c.stride == 0
                || c.filters == 0
                || c.kernel < c.stride
                || (c.kernel - c.stride) % 2 != 0
            {
                return Err(Error::config(
                    field,
                    "need kernel >= stride >= 1, filters >= 1 and an even kernel - stride",
                ));
            }
        }
        if self.architecture.fc1 == 0 || self.architecture.fc2 == 0 {
            return Err(Error::config(
                "agent.architecture",
                "fully connected widths must be positive",
            ));
        }
        Ok(())
    }
}
