use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::stream_rng;
use crate::env::{EnvConfig, JammerEmission};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedMode {
    Sweep,
    Comb,
    SwitchComb,
    Dynamic,
    PartialBand,
    Follower,
}

/// A non-learning jammer. Only the fields of the selected mode matter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedJammerConfig {
    pub mode: FixedMode,
    pub power_dbm: f64,
    /// Sweep speed in Hz/s.
    pub sweep_rate_hz_per_s: f64,
    pub comb_channels: Vec<usize>,
    pub comb_pair: [Vec<usize>; 2],
    pub switch_period_hops: u64,
    pub mode_cycle: Vec<FixedMode>,
    pub cycle_period_hops: u64,
    pub band_start: usize,
    pub band_width_channels: usize,
    pub rehop_period_hops: u64,
    pub delay_hops: usize,
}

impl Default for FixedJammerConfig {
    fn default() -> Self {
        FixedJammerConfig {
            mode: FixedMode::Sweep,
            power_dbm: 50.0,
            sweep_rate_hz_per_s: 500e6,
            comb_channels: vec![2, 5, 8],
            comb_pair: [vec![0, 1, 2], vec![5, 6, 7]],
            switch_period_hops: 50,
            mode_cycle: vec![FixedMode::Sweep, FixedMode::Comb, FixedMode::PartialBand],
            cycle_period_hops: 50,
            band_start: 0,
            band_width_channels: 3,
            rehop_period_hops: 50,
            delay_hops: 1,
        }
    }
}

impl FixedJammerConfig {
    pub fn of_mode(mode: FixedMode) -> Self {
        FixedJammerConfig {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self, field: &str, channels: usize) -> Result<()> {
        let in_range = |name: &str, set: &[usize]| -> Result<()> {
            match set.iter().find(|&&c| c >= channels) {
                Some(c) => Err(Error::config(
                    format!("{field}.{name}"),
                    format!("channel {c} outside [0, {channels})"),
                )),
                None => Ok(()),
            }
        };
        in_range("comb_channels", &self.comb_channels)?;
        in_range("comb_pair", &self.comb_pair[0])?;
        in_range("comb_pair", &self.comb_pair[1])?;
        if !(self.sweep_rate_hz_per_s > 0.0 && self.sweep_rate_hz_per_s.is_finite()) {
            return Err(Error::config(
                format!("{field}.sweep_rate_hz_per_s"),
                "must be positive",
            ));
        }
        if !self.power_dbm.is_finite() {
            return Err(Error::config(
                format!("{field}.power_dbm"),
                "must be finite",
            ));
        }
        for (name, p) in [
            ("switch_period_hops", self.switch_period_hops),
            ("cycle_period_hops", self.cycle_period_hops),
            ("rehop_period_hops", self.rehop_period_hops),
        ] {
            if p == 0 {
                return Err(Error::config(
                    format!("{field}.{name}"),
                    "must be at least 1",
                ));
            }
        }
        if self.band_width_channels == 0 || self.band_width_channels > channels {
            return Err(Error::config(
                format!("{field}.band_width_channels"),
                format!("must lie in [1, {channels}]"),
            ));
        }
        if self.band_start + self.band_width_channels > channels {
            return Err(Error::config(
                format!("{field}.band_start"),
                "block runs past the band",
            ));
        }
        if self.mode_cycle.is_empty()
            || self
                .mode_cycle
                .iter()
                .any(|m| matches!(m, FixedMode::Dynamic))
        {
            return Err(Error::config(
                format!("{field}.mode_cycle"),
                "must be non-empty and must not contain dynamic",
            ));
        }
        Ok(())
    }
}

/// A fixed-mode jammer bound to an environment geometry.
#[derive(Debug, Clone)]
pub struct FixedJammer {
    config: FixedJammerConfig,
    channels: usize,
    slots_per_hop: usize,
    /// Sweep advance in channels per slot.
    sweep_step: f64,
    seed: u64,
}

impl FixedJammer {
    pub fn new(config: FixedJammerConfig, env: &EnvConfig, seed: u64) -> Result<Self> {
        config.validate("jammer", env.channels)?;
        let sweep_step =
            config.sweep_rate_hz_per_s * env.slot_duration_s / env.channel_bandwidth_hz();
        Ok(FixedJammer {
            config,
            channels: env.channels,
            slots_per_hop: env.slots_per_hop,
            sweep_step,
            seed,
        })
    }

    pub fn config(&self) -> &FixedJammerConfig {
        &self.config
    }

    /// Channel of the sweep tone in global slot `k`.
    pub fn sweep_channel(&self, k: u64) -> usize {
        let x = (self.sweep_step * k as f64).rem_euclid(self.channels as f64);
        ((x + 1e-9).floor() as usize) % self.channels
    }

    fn partial_band_start(&self, hop: u64) -> usize {
        let period = hop / self.config.rehop_period_hops;
        if period == 0 {
            return self.config.band_start;
        }
        let mut rng = stream_rng(self.seed, period);
        rng.random_range(0..=self.channels - self.config.band_width_channels)
    }

    fn action_in(
        &self,
        mode: FixedMode,
        hop: u64,
        slot: usize,
        user_history: &[usize],
    ) -> Vec<usize> {
        let k = hop * self.slots_per_hop as u64 + slot as u64;
        match mode {
            FixedMode::Sweep => vec![self.sweep_channel(k)],
            FixedMode::Comb => self.config.comb_channels.clone(),
            FixedMode::SwitchComb => {
                let i = (hop / self.config.switch_period_hops) % 2;
                self.config.comb_pair[i as usize].clone()
            }
            FixedMode::Dynamic => {
                let cycle = &self.config.mode_cycle;
                let i = (hop / self.config.cycle_period_hops) as usize % cycle.len();
                self.action_in(cycle[i], hop, slot, user_history)
            }
            FixedMode::PartialBand => {
                let start = self.partial_band_start(hop);
                (start..start + self.config.band_width_channels).collect()
            }
            FixedMode::Follower => {
                let d = self.config.delay_hops;
                if d == 0 || user_history.len() < d {
                    Vec::new()
                } else {
                    vec![user_history[user_history.len() - d]]
                }
            }
        }
    }

    /// Channels jammed in slot `slot` of hop `hop` (both 0-based). `user_history`
    /// holds the user's channels of hops `0..hop`, oldest first.
    pub fn fixed_action(&self, hop: u64, slot: usize, user_history: &[usize]) -> Vec<usize> {
        self.action_in(self.config.mode, hop, slot, user_history)
    }

    pub fn emission(&self, hop: u64, user_history: &[usize]) -> JammerEmission {
        JammerEmission {
            power_dbm: self.config.power_dbm,
            slots: (0..self.slots_per_hop)
                .map(|s| self.fixed_action(hop, s, user_history))
                .collect(),
        }
    }
}
