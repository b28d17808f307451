use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{
    argmax, epsilon_greedy, linear_epsilon, stream_rng, AgentParams, Observation, QLearner,
    QLearnerSettings, Transition,
};
use crate::env::{HopOutcome, JammerEmission, SpectrumWaterfall};
use crate::error::{Error, Result};

/// Hops between learning updates, or a frozen policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "UpdateStepRepr", into = "UpdateStepRepr")]
pub enum UpdateStep {
    Every(u64),
    Infinity,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum UpdateStepRepr {
    Hops(u64),
    Word(String),
}

impl TryFrom<UpdateStepRepr> for UpdateStep {
    type Error = String;

    fn try_from(r: UpdateStepRepr) -> std::result::Result<Self, String> {
        match r {
            UpdateStepRepr::Hops(0) => Err("update_step must be at least 1".into()),
            UpdateStepRepr::Hops(n) => Ok(UpdateStep::Every(n)),
            UpdateStepRepr::Word(w) if w == "infinity" => Ok(UpdateStep::Infinity),
            UpdateStepRepr::Word(w) => {
                Err(format!("expected a hop count or \"infinity\", got {w:?}"))
            }
        }
    }
}

impl From<UpdateStep> for UpdateStepRepr {
    fn from(s: UpdateStep) -> Self {
        match s {
            UpdateStep::Every(n) => UpdateStepRepr::Hops(n),
            UpdateStep::Infinity => UpdateStepRepr::Word("infinity".into()),
        }
    }
}

impl fmt::Display for UpdateStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpdateStep::Every(n) => write!(f, "{n}"),
            UpdateStep::Infinity => f.write_str("infinity"),
        }
    }
}

/// A deep Q-learning jammer that blocks `block_channels` consecutive channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntelligentJammerConfig {
    /// `N_I`.
    pub block_channels: usize,
    pub power_dbm: f64,
    pub update_step: UpdateStep,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Updates over which epsilon decays.
    pub epsilon_decay_updates: u64,
}

impl Default for IntelligentJammerConfig {
    fn default() -> Self {
        IntelligentJammerConfig {
            block_channels: 3,
            power_dbm: 50.0,
            update_step: UpdateStep::Every(10),
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_updates: 100,
        }
    }
}

impl IntelligentJammerConfig {
    pub fn validate(&self, field: &str, channels: usize) -> Result<()> {
        if self.block_channels == 0 || self.block_channels > channels {
            return Err(Error::config(
                format!("{field}.block_channels"),
                format!("must lie in [1, {channels}]"),
            ));
        }
        if !self.power_dbm.is_finite() {
            return Err(Error::config(
                format!("{field}.power_dbm"),
                "must be finite",
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return Err(Error::config(
                format!("{field}.epsilon_start"),
                "epsilons must lie in [0, 1]",
            ));
        }
        if self.update_step == UpdateStep::Every(0) {
            return Err(Error::config(
                format!("{field}.update_step"),
                "must be at least 1",
            ));
        }
        Ok(())
    }
}

/// The learning jammer. It observes the user's waterfall and earns +1 per NACK.
#[derive(Debug, Clone)]
pub struct IntelligentJammer {
    config: IntelligentJammerConfig,
    learner: QLearner,
    rng: ChaCha8Rng,
    target_sync_hops: u64,
    slots_per_hop: usize,
    last: Option<(Arc<SpectrumWaterfall>, usize)>,
}

impl IntelligentJammer {
    /// `hp` supplies the network and learning settings, mirroring the user's.
    pub fn new(
        config: IntelligentJammerConfig,
        hp: &AgentParams,
        obs: &Observation,
        slots_per_hop: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate("jammer", obs.channels)?;
        let settings = QLearnerSettings {
            architecture: hp.architecture,
            actions: obs.channels - config.block_channels + 1,
            learning_rate: hp.alpha_q,
            batch: hp.batch_q,
            memory: hp.memory_q,
            gamma: hp.gamma,
        };
        let learner = QLearner::new(settings, obs, &mut stream_rng(seed, 0))?;
        Ok(IntelligentJammer {
            config,
            learner,
            rng: stream_rng(seed, 1),
            target_sync_hops: hp.target_sync_hops,
            slots_per_hop,
            last: None,
        })
    }

    pub fn config(&self) -> &IntelligentJammerConfig {
        &self.config
    }

    pub fn learner(&self) -> &QLearner {
        &self.learner
    }

    pub fn learner_mut(&mut self) -> &mut QLearner {
        &mut self.learner
    }

    pub fn actions(&self) -> usize {
        self.learner.actions()
    }

    pub fn epsilon(&self) -> f64 {
        match self.config.update_step {
            UpdateStep::Infinity => self.config.epsilon_end,
            UpdateStep::Every(_) => linear_epsilon(
                self.config.epsilon_start,
                self.config.epsilon_end,
                self.config.epsilon_decay_updates,
                self.learner.updates(),
            ),
        }
    }

    /// Block start for `state`, epsilon-greedy at `epsilon`.
    pub fn act_with(&mut self, state: &SpectrumWaterfall, epsilon: f64) -> Result<usize> {
        let learner = &self.learner;
        epsilon_greedy(&mut self.rng, epsilon, learner.actions(), || {
            Ok(argmax(&learner.q_values(state)?))
        })
    }

    /// Channels covered by a block starting at `start`.
    pub fn block(&self, start: usize) -> Vec<usize> {
        (start..start + self.config.block_channels).collect()
    }

    /// Picks this hop's block and remembers it for [`IntelligentJammer::update`].
    pub fn emission(&mut self, state: &Arc<SpectrumWaterfall>) -> Result<JammerEmission> {
        let start = self.act_with(state, self.epsilon())?;
        self.last = Some((Arc::clone(state), start));
        Ok(JammerEmission::constant(
            self.config.power_dbm,
            &self.block(start),
            self.slots_per_hop,
        ))
    }

    /// Stores the hop and, on update hops, takes one gradient step. `hop` counts from 1.
    pub fn update(&mut self, outcome: &HopOutcome, hop: u64) -> Result<Option<f64>> {
        let Some((state, action)) = self.last.take() else {
            return Ok(None);
        };
        self.learner.remember(Transition {
            state,
            action,
            reward: outcome.jammer_reward,
            next_state: Arc::clone(&outcome.next_state),
        });
        let UpdateStep::Every(step) = self.config.update_step else {
            return Ok(None);
        };
        let mut loss = None;
        if hop.is_multiple_of(step) && self.learner.ready() {
            loss = Some(self.learner.train_step(&mut self.rng)?);
        }
        if hop.is_multiple_of(self.target_sync_hops) {
            self.learner.sync_target();
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, Environment};

    fn jammer(step: UpdateStep, seed: u64) -> IntelligentJammer {
        let cfg = IntelligentJammerConfig {
            update_step: step,
            ..Default::default()
        };
        let env = EnvConfig::desk();
        IntelligentJammer::new(cfg, &AgentParams::desk(), &Observation::of(&env), 10, seed).unwrap()
    }

    #[test]
    fn update_step_parses() {
        #[derive(Deserialize)]
        struct W {
            s: UpdateStep,
        }
        assert_eq!(
            toml::from_str::<W>("s = 10").unwrap().s,
            UpdateStep::Every(10)
        );
        assert_eq!(
            toml::from_str::<W>("s = \"infinity\"").unwrap().s,
            UpdateStep::Infinity
        );
        assert!(toml::from_str::<W>("s = 0").is_err());
        assert!(toml::from_str::<W>("s = \"never\"").is_err());
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut j = jammer(UpdateStep::Every(10), 3);
        let env = Environment::new(EnvConfig::desk()).unwrap();
        assert_eq!(j.actions(), 8);
        let n = 10_000;
        let mut counts = [0f64; 8];
        for _ in 0..n {
            counts[j.act_with(env.state(), 1.0).unwrap()] += 1.0;
        }
        let e = n as f64 / 8.0;
        let chi2: f64 = counts.iter().map(|c| (c - e).powi(2) / e).sum();
        // Seven degrees of freedom: mean 7, standard deviation sqrt(14).
        assert!(chi2 < 7.0 + 3.0 * 14f64.sqrt(), "chi2 {chi2}");
    }

    #[test]
    fn greedy_picks_the_hand_set_argmax() {
        let mut j = jammer(UpdateStep::Every(10), 0);
        let names: Vec<String> = j.learner().params().names().map(str::to_owned).collect();
        for n in &names {
            j.learner_mut().params_mut().get_mut(n).unwrap().fill(0.0);
        }
        let bias = names.iter().rfind(|n| n.ends_with(".b")).unwrap();
        j.learner_mut()
            .params_mut()
            .get_mut(bias)
            .unwrap()
            .data_mut()[4] = 1.0;
        let env = Environment::new(EnvConfig::desk()).unwrap();
        assert_eq!(j.act_with(env.state(), 0.0).unwrap(), 4);
        assert_eq!(j.block(7), vec![7, 8, 9]);
    }

    fn drive(j: &mut IntelligentJammer, hops: u64, user: usize) {
        let mut env = Environment::new(EnvConfig::desk()).unwrap();
        for hop in 1..=hops {
            let s = Arc::clone(env.state());
            let em = j.emission(&s).unwrap();
            let out = env.step_hop(user, &[em]).unwrap();
            j.update(&out, hop).unwrap();
        }
    }

    #[test]
    fn update_count_follows_the_step() {
        let mut j = jammer(UpdateStep::Every(10), 1);
        drive(&mut j, 300, 5);
        assert_eq!(j.learner().updates(), 30);
    }

    #[test]
    fn infinite_step_freezes_parameters() {
        let mut j = jammer(UpdateStep::Infinity, 1);
        let before = j.learner().params().clone();
        drive(&mut j, 200, 5);
        assert_eq!(j.learner().updates(), 0);
        for id in before.ids() {
            assert_eq!(before.value(id), j.learner().params().value(id));
        }
    }

    #[test]
    fn learns_to_cover_a_stuck_user() {
        let mut j = jammer(UpdateStep::Every(1), 2);
        drive(&mut j, 1500, 6);
        let mut env = Environment::new(EnvConfig::desk()).unwrap();
        let mut covered = 0;
        for _ in 0..100 {
            let s = Arc::clone(env.state());
            let start = j.act_with(&s, 0.0).unwrap();
            if j.block(start).contains(&6) {
                covered += 1;
            }
            let em = JammerEmission::constant(50.0, &j.block(start), 10);
            env.step_hop(6, &[em]).unwrap();
        }
        assert!(covered >= 95, "covered {covered}/100");
    }
}
