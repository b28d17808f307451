//! Time-slotted spectrum environment.

mod config;
mod environment;
mod power;
mod spectrum;

pub use config::{dbm_to_mw, link_gain, mw_to_db, EnvConfig, FadingMode, LinkFading, LinkGain};
pub use environment::{Environment, HopOutcome, JammerEmission};
pub use power::{compose_power, sinr, ChannelPowerMap, Emission};
pub use spectrum::{
    coarse_interference, coarse_spectrum, spectrum_vector, CoarseSpectrum, SpectrumVector,
    SpectrumWaterfall,
};
