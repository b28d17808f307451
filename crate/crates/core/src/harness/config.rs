use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{AgentParams, RandomFh};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::jammer::{FixedJammerConfig, IntelligentJammerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Paper,
    #[default]
    Desk,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            _ => Err(Error::config(
                "scale",
                format!("expected paper or desk, got {s:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    RandomFh,
    Dqn,
    PredictorOnly,
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JammerSpec {
    Fixed(FixedJammerConfig),
    Intelligent(IntelligentJammerConfig),
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scale: Scale,
    pub env: EnvConfig,
    pub jammers: Vec<JammerSpec>,
    pub agent: AgentKind,
    pub agent_params: AgentParams,
    /// Length of the random hopping sequence.
    pub sequence_length: usize,
    pub episodes: u64,
    pub hops_per_episode: u64,
    pub trials: u64,
    pub base_seed: u64,
    /// Throughput defining episodes-to-target.
    pub target_throughput: f64,
    /// Ends a trial once this many consecutive episodes reach the target.
    pub stop_after_sustained: Option<u64>,
    /// Worker threads; results do not depend on it.
    pub threads: usize,
    pub output_path: Option<PathBuf>,
    /// Optional per-hop telemetry file.
    pub telemetry_path: Option<PathBuf>,
}

/// Command-line overrides applied before defaults are merged.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scale: Option<Scale>,
    pub base_seed: Option<u64>,
    pub trials: Option<u64>,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for a scale: no jammers, joint agent, 300 episodes of 100 hops, 5 trials.
    pub fn defaults(scale: Scale) -> Self {
        let (env, agent_params) = match scale {
            Scale::Paper => (EnvConfig::paper(), AgentParams::paper()),
            Scale::Desk => (EnvConfig::desk(), AgentParams::desk()),
        };
        ExperimentConfig {
            scale,
            env,
            jammers: Vec::new(),
            agent: AgentKind::Joint,
            agent_params,
            sequence_length: RandomFh::DEFAULT_LENGTH,
            episodes: 300,
            hops_per_episode: 100,
            trials: 5,
            base_seed: 0,
            target_throughput: 0.9,
            stop_after_sustained: None,
            threads: 1,
            output_path: None,
            telemetry_path: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_str_with(text, &Overrides::default())
    }

    /// Parses `text`, layering it over the defaults of its scale.
    pub fn from_toml_str_with(text: &str, overrides: &Overrides) -> Result<Self> {
        let mut user: toml::Table = toml::from_str(text)?;
        if let Some(s) = overrides.scale {
            user.insert("scale".into(), toml::Value::try_from(s)?);
        }
        let scale = match user.get("scale") {
            None => Scale::default(),
            Some(v) => v
                .clone()
                .try_into()
                .map_err(|e| Error::config("scale", format!("{e}")))?,
        };
        let mut merged = toml::Table::try_from(Self::defaults(scale))?;
        merge(&mut merged, user);
        let mut cfg: ExperimentConfig = merged.try_into()?;
        if let Some(s) = overrides.base_seed {
            cfg.base_seed = s;
        }
        if let Some(t) = overrides.trials {
            cfg.trials = t;
        }
        if let Some(p) = &overrides.output_path {
            cfg.output_path = Some(p.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str_with(&text, overrides)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn trial_seed(&self, trial: u64) -> u64 {
        self.base_seed.wrapping_add(trial)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent_params.validate()?;
        for (i, j) in self.jammers.iter().enumerate() {
            let field = format!("jammers[{i}]");
            match j {
                JammerSpec::Fixed(f) => f.validate(&field, self.env.channels)?,
                JammerSpec::Intelligent(c) => c.validate(&field, self.env.channels)?,
            }
        }
        for (field, v) in [
            ("episodes", self.episodes),
            ("hops_per_episode", self.hops_per_episode),
            ("trials", self.trials),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if self.sequence_length == 0 {
            return Err(Error::config("sequence_length", "must be at least 1"));
        }
        if self.threads == 0 {
            return Err(Error::config("threads", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.target_throughput) {
            return Err(Error::config("target_throughput", "must lie in [0, 1]"));
        }
        if self.stop_after_sustained == Some(0) {
            return Err(Error::config("stop_after_sustained", "must be at least 1"));
        }
        Ok(())
    }
}

/// Recursively overlays `top` onto `base`; non-table values replace.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
