//! Time-slotted anti-jamming spectrum simulator with fixed-mode and learning
//! jammers, and a channel-access agent that couples deep Q-learning with an
//! auxiliary coarse-grained spectrum predictor.

pub mod agent;
pub mod env;
pub mod error;
pub mod harness;
pub mod jammer;
pub mod nn;

pub use error::{Error, Result};
