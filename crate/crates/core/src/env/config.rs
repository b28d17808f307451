use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FadingMode {
    /// Pure path loss, `distance^-alpha_d` every slot.
    #[default]
    Deterministic,
    /// Path loss times an `Exp(1)` power fading draw, redrawn every slot.
    Rayleigh,
}

/// Path loss and fading of one transmitter-to-receiver link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGain {
    pub distance: f64,
    pub alpha_d: f64,
    #[serde(default)]
    pub fading: FadingMode,
}

impl Default for LinkGain {
    fn default() -> Self {
        LinkGain::unit()
    }
}

impl LinkGain {
    pub fn unit() -> Self {
        LinkGain {
            distance: 1.0,
            alpha_d: 2.0,
            fading: FadingMode::Deterministic,
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.distance > 0.0 && self.distance.is_finite()) {
            return Err(Error::config(
                format!("{field}.distance"),
                format!("must be positive and finite, got {}", self.distance),
            ));
        }
        if !self.alpha_d.is_finite() {
            return Err(Error::config(format!("{field}.alpha_d"), "must be finite"));
        }
        Ok(())
    }

    pub fn path_loss(&self) -> f64 {
        self.distance.powf(-self.alpha_d)
    }
}

/// Per-link fading source. Each draw depends only on `(seed, link, slot)`.
#[derive(Debug, Clone)]
pub struct LinkFading {
    link: LinkGain,
    rng: ChaCha8Rng,
}

impl LinkFading {
    pub fn new(link: LinkGain, seed: u64, link_index: u64) -> Result<Self> {
        link.validate("link")?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(link_index);
        Ok(LinkFading { link, rng })
    }

    /// Linear power gain of the link during global slot `slot`.
    pub fn gain(&mut self, slot: u64) -> f64 {
        match self.link.fading {
            FadingMode::Deterministic => self.link.path_loss(),
            FadingMode::Rayleigh => {
                // One f64 draw consumes two 32-bit words.
                self.rng.set_word_pos(u128::from(slot) * 2);
                let u: f64 = self.rng.sample(Open01);
                self.link.path_loss() * -u.ln()
            }
        }
    }
}

/// Convenience wrapper over [`LinkFading`] for a single evaluation.
pub fn link_gain(link: &LinkGain, seed: u64, link_index: u64, slot: u64) -> Result<f64> {
    Ok(LinkFading::new(*link, seed, link_index)?.gain(slot))
}

/// Spectrum geometry, radio parameters and the environment seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    /// Number of channels `M`.
    pub channels: usize,
    /// Total band `B` in Hz.
    pub bandwidth_hz: f64,
    /// Spectrum samples per slot `N_F`.
    pub spectrum_bins: usize,
    /// Waterfall history in slots `N_T`.
    pub history_slots: usize,
    /// Slots per hop `N_h`.
    pub slots_per_hop: usize,
    /// Slot duration in seconds.
    pub slot_duration_s: f64,
    /// Demodulation threshold in dB.
    pub sinr_threshold_db: f64,
    pub user_power_dbm: f64,
    /// Noise power per channel in dBm.
    pub noise_dbm: f64,
    #[serde(default)]
    pub user_link: LinkGain,
    /// One link per jammer, in jammer order.
    #[serde(default)]
    pub jammer_links: Vec<LinkGain>,
    #[serde(default)]
    pub seed: u64,
}

impl EnvConfig {
    /// 20 MHz split into 10 channels, 1 ms slots, 10 slots per hop, 200 x 200 waterfall.
    pub fn paper() -> Self {
        EnvConfig {
            channels: 10,
            bandwidth_hz: 20e6,
            spectrum_bins: 200,
            history_slots: 200,
            slots_per_hop: 10,
            slot_duration_s: 1e-3,
            sinr_threshold_db: 0.0,
            user_power_dbm: 30.0,
            noise_dbm: 0.0,
            user_link: LinkGain::unit(),
            jammer_links: Vec::new(),
            seed: 0,
        }
    }

    /// Full-scale parameters with a 40 x 40 waterfall.
    pub fn desk() -> Self {
        EnvConfig {
            spectrum_bins: 40,
            history_slots: 40,
            ..EnvConfig::paper()
        }
    }

    pub fn channel_bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz / self.channels as f64
    }

    pub fn bins_per_channel(&self) -> usize {
        self.spectrum_bins / self.channels
    }

    pub fn hop_duration_s(&self) -> f64 {
        self.slots_per_hop as f64 * self.slot_duration_s
    }

    /// dB value of one bin holding nothing but noise.
    pub fn noise_floor_bin_db(&self) -> f64 {
        self.noise_dbm - 10.0 * (self.bins_per_channel() as f64).log10()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels < 2 {
            return Err(Error::config("env.channels", "need at least 2 channels"));
        }
        if self.spectrum_bins == 0 || !self.spectrum_bins.is_multiple_of(self.channels) {
            return Err(Error::config(
                "env.spectrum_bins",
                format!(
                    "must be a positive multiple of channels ({}), got {}",
                    self.channels, self.spectrum_bins
                ),
            ));
        }
        if self.slots_per_hop == 0 {
            return Err(Error::config("env.slots_per_hop", "must be at least 1"));
        }
        if self.history_slots == 0 {
            return Err(Error::config("env.history_slots", "must be at least 1"));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::config("env.bandwidth_hz", "must be positive"));
        }
        if !(self.slot_duration_s > 0.0 && self.slot_duration_s.is_finite()) {
            return Err(Error::config("env.slot_duration_s", "must be positive"));
        }
        for (name, v) in [
            ("env.sinr_threshold_db", self.sinr_threshold_db),
            ("env.user_power_dbm", self.user_power_dbm),
            ("env.noise_dbm", self.noise_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        self.user_link.validate("env.user_link")?;
        for (i, l) in self.jammer_links.iter().enumerate() {
            l.validate(&format!("env.jammer_links[{i}]"))?;
        }
        Ok(())
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_db(mw: f64) -> f64 {
    10.0 * mw.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_gain_examples() {
        let mut l = LinkGain::unit();
        assert_eq!(link_gain(&l, 0, 0, 5).unwrap(), 1.0);
        l.distance = 2.0;
        assert_eq!(link_gain(&l, 0, 0, 5).unwrap(), 0.25);
    }

    #[test]
    fn non_positive_distance_rejected() {
        let l = LinkGain {
            distance: 0.0,
            ..LinkGain::unit()
        };
        assert!(matches!(link_gain(&l, 1, 0, 0), Err(Error::Config { .. })));
        let l = LinkGain {
            distance: -3.0,
            ..LinkGain::unit()
        };
        assert!(LinkFading::new(l, 1, 0).is_err());
    }

    #[test]
    fn rayleigh_mean_is_unit_power() {
        let l = LinkGain {
            distance: 2.0,
            alpha_d: 2.0,
            fading: FadingMode::Rayleigh,
        };
        let mut f = LinkFading::new(l, 42, 1).unwrap();
        let n = 100_000;
        let mut sum = 0.0;
        for slot in 0..n {
            let g = f.gain(slot);
            assert!(g > 0.0);
            sum += g / 0.25;
        }
        let mean = sum / n as f64;
        assert!((0.99..=1.01).contains(&mean), "mean {mean}");
    }

    #[test]
    fn rayleigh_draw_depends_only_on_slot() {
        let l = LinkGain {
            fading: FadingMode::Rayleigh,
            ..LinkGain::unit()
        };
        let mut a = LinkFading::new(l, 9, 2).unwrap();
        let mut b = LinkFading::new(l, 9, 2).unwrap();
        let fwd: Vec<f64> = (0..50).map(|s| a.gain(s)).collect();
        let rev: Vec<f64> = (0..50).rev().map(|s| b.gain(s)).collect();
        assert!(fwd.iter().eq(rev.iter().rev()));
        // Constant within a slot.
        assert_eq!(a.gain(17), a.gain(17));
        let mut other_link = LinkFading::new(l, 9, 3).unwrap();
        assert_ne!(a.gain(17), other_link.gain(17));
    }

    #[test]
    fn validation() {
        assert!(EnvConfig::desk().validate().is_ok());
        assert!(EnvConfig::paper().validate().is_ok());
        let mut c = EnvConfig::desk();
        c.spectrum_bins = 45;
        assert!(c.validate().is_err());
        let mut c = EnvConfig::desk();
        c.channels = 1;
        assert!(c.validate().is_err());
        let mut c = EnvConfig::desk();
        c.slots_per_hop = 0;
        assert!(c.validate().is_err());
        let c = EnvConfig::paper();
        assert_eq!(c.channel_bandwidth_hz() * c.channels as f64, c.bandwidth_hz);
        assert_eq!(c.channel_bandwidth_hz(), 2e6);
    }
}
