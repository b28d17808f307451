//! Fixed-mode and learning jammers.

mod fixed;
mod intelligent;

use std::sync::Arc;

pub use fixed::{FixedJammer, FixedJammerConfig, FixedMode};
pub use intelligent::{IntelligentJammer, IntelligentJammerConfig, UpdateStep};

use crate::env::{HopOutcome, JammerEmission, SpectrumWaterfall};
use crate::error::Result;

/// Any jammer taking part in a trial.
#[derive(Debug, Clone)]
pub enum Jammer {
    Fixed(FixedJammer),
    Intelligent(Box<IntelligentJammer>),
}

impl Jammer {
    /// Emission for hop `hop` (0-based). `user_history` lists the user's past channels.
    pub fn emission(
        &mut self,
        hop: u64,
        state: &Arc<SpectrumWaterfall>,
        user_history: &[usize],
    ) -> Result<JammerEmission> {
        match self {
            Jammer::Fixed(j) => Ok(j.emission(hop, user_history)),
            Jammer::Intelligent(j) => j.emission(state),
        }
    }

    /// Learning feedback after the hop; `hop` counts from 1.
    pub fn observe(&mut self, outcome: &HopOutcome, hop: u64) -> Result<()> {
        if let Jammer::Intelligent(j) = self {
            j.update(outcome, hop)?;
        }
        Ok(())
    }
}
