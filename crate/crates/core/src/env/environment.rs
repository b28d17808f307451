use std::sync::Arc;

use super::config::{EnvConfig, LinkFading, LinkGain};
use super::power::{compose_power, sinr, ChannelPowerMap, Emission};
use super::spectrum::{
    coarse_interference, coarse_spectrum, spectrum_vector, CoarseSpectrum, SpectrumWaterfall,
};
use crate::error::{Error, Result};

/// One jammer's emissions over a hop: the channels it occupies in each slot.
#[derive(Debug, Clone, PartialEq)]
pub struct JammerEmission {
    pub power_dbm: f64,
    /// `N_h` entries, one channel set per slot.
    pub slots: Vec<Vec<usize>>,
}

impl JammerEmission {
    /// The same channel set in every slot of the hop.
    pub fn constant(power_dbm: f64, channels: &[usize], slots_per_hop: usize) -> Self {
        JammerEmission {
            power_dbm,
            slots: vec![channels.to_vec(); slots_per_hop],
        }
    }

    pub fn silent(power_dbm: f64, slots_per_hop: usize) -> Self {
        JammerEmission::constant(power_dbm, &[], slots_per_hop)
    }
}

/// Result of one hop.
#[derive(Debug, Clone, PartialEq)]
pub struct HopOutcome {
    pub sinr_per_slot: Vec<f64>,
    /// Minimum SINR over the hop, in dB.
    pub user_reward: f64,
    pub ack: bool,
    /// +1 on NACK, -1 on ACK.
    pub jammer_reward: f64,
    /// Per-channel dB power of the hop, user signal included.
    pub coarse: CoarseSpectrum,
    /// Per-channel dB power of the hop, user signal excluded.
    pub coarse_interference: CoarseSpectrum,
    pub next_state: Arc<SpectrumWaterfall>,
}

/// The spectrum environment shared by the user and the jammers.
#[derive(Debug, Clone)]
pub struct Environment {
    config: EnvConfig,
    waterfall: Arc<SpectrumWaterfall>,
    user_fading: LinkFading,
    jammer_fading: Vec<LinkFading>,
    slot: u64,
    hop: u64,
}

impl Environment {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let waterfall = SpectrumWaterfall::filled(
            config.history_slots,
            config.spectrum_bins,
            config.noise_floor_bin_db(),
        );
        let user_fading = LinkFading::new(config.user_link, config.seed, 0)?;
        Ok(Environment {
            waterfall: Arc::new(waterfall),
            user_fading,
            jammer_fading: Vec::new(),
            slot: 0,
            hop: 0,
            config,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// The current state: the waterfall observed at the start of the next hop.
    pub fn state(&self) -> &Arc<SpectrumWaterfall> {
        &self.waterfall
    }

    /// Hops completed so far.
    pub fn hop(&self) -> u64 {
        self.hop
    }

    /// Global index of the next slot.
    pub fn slot(&self) -> u64 {
        self.slot
    }

    fn jammer_link(&mut self, i: usize) -> Result<&mut LinkFading> {
        while self.jammer_fading.len() <= i {
            let j = self.jammer_fading.len();
            let link = self
                .config
                .jammer_links
                .get(j)
                .copied()
                .unwrap_or_else(LinkGain::unit);
            self.jammer_fading
                .push(LinkFading::new(link, self.config.seed, j as u64 + 1)?);
        }
        Ok(&mut self.jammer_fading[i])
    }

    /// Simulates one hop with the user on `user_channel`.
    pub fn step_hop(
        &mut self,
        user_channel: usize,
        jammers: &[JammerEmission],
    ) -> Result<HopOutcome> {
        let m = self.config.channels;
        let n_h = self.config.slots_per_hop;
        if user_channel >= m {
            return Err(Error::ChannelOutOfRange {
                index: user_channel,
                channels: m,
            });
        }
        for j in jammers {
            if j.slots.len() != n_h {
                return Err(Error::SlotCount {
                    expected: n_h,
                    got: j.slots.len(),
                });
            }
            if let Some(&c) = j.slots.iter().flatten().find(|&&c| c >= m) {
                return Err(Error::ChannelOutOfRange {
                    index: c,
                    channels: m,
                });
            }
        }

        let mut maps: Vec<ChannelPowerMap> = Vec::with_capacity(n_h);
        let mut rows = Vec::with_capacity(n_h);
        let mut sinr_per_slot = Vec::with_capacity(n_h);
        let mut emissions = Vec::new();
        for k in 0..n_h {
            let slot = self.slot + k as u64;
            let user = Emission {
                channel: user_channel,
                power_dbm: self.config.user_power_dbm,
                gain: self.user_fading.gain(slot),
            };
            emissions.clear();
            for (i, j) in jammers.iter().enumerate() {
                let gain = self.jammer_link(i)?.gain(slot);
                emissions.extend(j.slots[k].iter().map(|&channel| Emission {
                    channel,
                    power_dbm: j.power_dbm,
                    gain,
                }));
            }
            let map = compose_power(m, self.config.noise_dbm, Some(user), &emissions)?;
            sinr_per_slot.push(sinr(&map, user_channel)?);
            rows.push(spectrum_vector(&map, self.config.spectrum_bins)?);
            maps.push(map);
        }

        let user_reward = sinr_per_slot.iter().copied().fold(f64::INFINITY, f64::min);
        let ack = sinr_per_slot
            .iter()
            .all(|&s| s >= self.config.sinr_threshold_db);
        let coarse = coarse_spectrum(&maps, n_h)?;
        let coarse_interference = coarse_interference(&maps, n_h)?;

        Arc::make_mut(&mut self.waterfall).push_rows(&rows);
        self.slot += n_h as u64;
        self.hop += 1;

        Ok(HopOutcome {
            sinr_per_slot,
            user_reward,
            ack,
            jammer_reward: if ack { -1.0 } else { 1.0 },
            coarse,
            coarse_interference,
            next_state: Arc::clone(&self.waterfall),
        })
    }
}
