use super::config::{dbm_to_mw, mw_to_db};
use crate::error::{Error, Result};

/// A transmitter occupying one channel for one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    pub channel: usize,
    pub power_dbm: f64,
    /// Linear link gain to the receiver.
    pub gain: f64,
}

/// Received linear power (mW) per channel during one slot, by source.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPowerMap {
    pub signal: Vec<f64>,
    pub jam: Vec<f64>,
    pub noise: Vec<f64>,
}

impl ChannelPowerMap {
    pub fn channels(&self) -> usize {
        self.signal.len()
    }

    pub fn total(&self, channel: usize) -> f64 {
        self.signal[channel] + self.jam[channel] + self.noise[channel]
    }

    /// Everything except the user's own signal.
    pub fn interference(&self, channel: usize) -> f64 {
        self.jam[channel] + self.noise[channel]
    }
}

/// Composes one slot's received power with channel-aligned rectangular masks.
pub fn compose_power(
    channels: usize,
    noise_dbm: f64,
    user: Option<Emission>,
    jammers: &[Emission],
) -> Result<ChannelPowerMap> {
    let check = |c: usize| {
        if c < channels {
            Ok(())
        } else {
            Err(Error::ChannelOutOfRange { index: c, channels })
        }
    };
    let mut map = ChannelPowerMap {
        signal: vec![0.0; channels],
        jam: vec![0.0; channels],
        noise: vec![dbm_to_mw(noise_dbm); channels],
    };
    if let Some(u) = user {
        check(u.channel)?;
        map.signal[u.channel] = dbm_to_mw(u.power_dbm) * u.gain;
    }
    for j in jammers {
        check(j.channel)?;
        map.jam[j.channel] += dbm_to_mw(j.power_dbm) * j.gain;
    }
    Ok(map)
}

/// SINR in dB on the user's channel.
pub fn sinr(map: &ChannelPowerMap, user_channel: usize) -> Result<f64> {
    if user_channel >= map.channels() {
        return Err(Error::ChannelOutOfRange {
            index: user_channel,
            channels: map.channels(),
        });
    }
    let s = map.signal[user_channel];
    if s <= 0.0 {
        return Err(Error::NoSignal(user_channel));
    }
    Ok(mw_to_db(s / map.interference(user_channel)))
}
