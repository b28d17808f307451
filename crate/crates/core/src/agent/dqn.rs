use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::memory::{ReplayMemory, Transition};
use super::policy::{argmax, epsilon_greedy, linear_epsilon, stream_rng, Normalizer};
use super::{AgentParams, ChannelAgent, Observation, StepTelemetry};
use crate::env::{HopOutcome, SpectrumWaterfall};
use crate::error::Result;
use crate::nn::{dqn_target, Architecture, ParameterSet, SingleCache, SingleNet};

/// Settings of a [`QLearner`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QLearnerSettings {
    pub architecture: Architecture,
    pub actions: usize,
    pub learning_rate: f64,
    pub batch: usize,
    pub memory: usize,
    pub gamma: f64,
}

/// A single-head deep Q-learner with replay memory and a target network.
#[derive(Debug, Clone)]
pub struct QLearner {
    net: SingleNet,
    params: ParameterSet,
    target: ParameterSet,
    memory: ReplayMemory<Transition>,
    settings: QLearnerSettings,
    normalizer: Normalizer,
    cache: SingleCache,
    updates: u64,
}

impl QLearner {
    pub fn new<R: Rng + ?Sized>(
        settings: QLearnerSettings,
        obs: &Observation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut params = ParameterSet::new();
        let net = SingleNet::build(
            &settings.architecture,
            [obs.rows, obs.bins],
            settings.actions,
            &mut params,
        )?;
        net.init(&mut params, rng);
        let target = params.clone();
        Ok(QLearner {
            net,
            params,
            target,
            memory: ReplayMemory::new(settings.memory),
            settings,
            normalizer: obs.normalizer,
            cache: SingleCache::default(),
            updates: 0,
        })
    }

    pub fn q_values(&self, state: &SpectrumWaterfall) -> Result<Vec<f64>> {
        self.net
            .forward(&self.params, &self.normalizer.apply(state), None)
    }

    pub fn remember(&mut self, t: Transition) {
        self.memory.push(t);
    }

    pub fn memory(&self) -> &ReplayMemory<Transition> {
        &self.memory
    }

    /// True once the memory holds more than one minibatch.
    pub fn ready(&self) -> bool {
        self.memory.len() > self.settings.batch
    }

    /// One SGD step on a random minibatch; returns the minibatch loss.
    pub fn train_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        let idx = self.memory.sample_indices(self.settings.batch, rng);
        let b = idx.len() as f64;
        let mut loss = 0.0;
        self.params.zero_grads();
        for i in idx {
            let t = &self.memory.get(i).expect("sampled index");
            let next =
                self.net
                    .forward(&self.target, &self.normalizer.apply(&t.next_state), None)?;
            let eta = dqn_target(t.reward, self.settings.gamma, &next);
            let q = self.net.forward(
                &self.params,
                &self.normalizer.apply(&t.state),
                Some(&mut self.cache),
            )?;
            let err = eta - q[t.action];
            loss += err * err / b;
            let mut g = vec![0.0; q.len()];
            g[t.action] = -2.0 * err / b;
            self.net.backward(&mut self.params, &self.cache, &g)?;
        }
        self.params.sgd_step(self.settings.learning_rate);
        self.updates += 1;
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        self.target.copy_values_from(&self.params);
    }

    /// Gradient steps taken so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    pub fn target_params(&self) -> &ParameterSet {
        &self.target
    }

    pub fn actions(&self) -> usize {
        self.settings.actions
    }
}

/// The plain deep Q-learning user with linearly decaying epsilon-greedy exploration.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    learner: QLearner,
    params: AgentParams,
    rng: ChaCha8Rng,
    hops: u64,
}

impl DqnAgent {
    pub fn new(params: AgentParams, obs: &Observation, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut init = stream_rng(seed, super::STREAM_INIT);
        let learner = QLearner::new(
            QLearnerSettings {
                architecture: params.architecture,
                actions: obs.channels,
                learning_rate: params.alpha_q,
                batch: params.batch_q,
                memory: params.memory_q,
                gamma: params.gamma,
            },
            obs,
            &mut init,
        )?;
        Ok(DqnAgent {
            learner,
            params,
            rng: stream_rng(seed, super::STREAM_POLICY),
            hops: 0,
        })
    }

    pub fn learner(&self) -> &QLearner {
        &self.learner
    }

    pub fn epsilon(&self) -> f64 {
        linear_epsilon(
            self.params.epsilon_start,
            self.params.epsilon_end,
            self.params.epsilon_decay_hops,
            self.hops,
        )
    }
}

impl ChannelAgent for DqnAgent {
    fn act(&mut self, state: &Arc<SpectrumWaterfall>) -> Result<usize> {
        let eps = self.epsilon();
        let learner = &self.learner;
        epsilon_greedy(&mut self.rng, eps, learner.actions(), || {
            Ok(argmax(&learner.q_values(state)?))
        })
    }

    fn observe(
        &mut self,
        state: &Arc<SpectrumWaterfall>,
        action: usize,
        outcome: &HopOutcome,
        hop: u64,
    ) -> Result<StepTelemetry> {
        self.hops += 1;
        self.learner.remember(Transition {
            state: Arc::clone(state),
            action,
            reward: self.params.shaped_reward(outcome.user_reward),
            next_state: Arc::clone(&outcome.next_state),
        });
        let mut tel = StepTelemetry::default();
        if self.learner.ready() {
            tel.loss_q = Some(self.learner.train_step(&mut self.rng)?);
        }
        if hop.is_multiple_of(self.params.target_sync_hops) {
            self.learner.sync_target();
        }
        Ok(tel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, Environment, JammerEmission};

    fn settings() -> QLearnerSettings {
        QLearnerSettings {
            architecture: AgentParams::desk().architecture,
            actions: 10,
            learning_rate: 1e-3,
            batch: 4,
            memory: 20,
            gamma: 0.1,
        }
    }

    #[test]
    fn training_waits_for_a_full_batch() {
        let obs = Observation::of(&EnvConfig::desk());
        let mut agent = DqnAgent::new(AgentParams::desk(), &obs, 1).unwrap();
        let before = agent.learner().params().clone();
        let mut env = Environment::new(EnvConfig::desk()).unwrap();
        for hop in 1..=8 {
            let s = Arc::clone(env.state());
            let a = agent.act(&s).unwrap();
            let out = env.step_hop(a, &[]).unwrap();
            let tel = agent.observe(&s, a, &out, hop).unwrap();
            assert!(tel.loss_q.is_none());
        }
        for (a, b) in before.ids().zip(agent.learner().params().ids()) {
            assert_eq!(before.value(a), agent.learner().params().value(b));
        }
    }

    #[test]
    fn fixed_checkpoint_is_deterministic() {
        let obs = Observation::of(&EnvConfig::desk());
        let a = QLearner::new(settings(), &obs, &mut stream_rng(4, 0)).unwrap();
        let b = QLearner::new(settings(), &obs, &mut stream_rng(4, 0)).unwrap();
        let env = Environment::new(EnvConfig::desk()).unwrap();
        let qa = a.q_values(env.state()).unwrap();
        assert_eq!(qa.len(), 10);
        assert_eq!(qa, b.q_values(env.state()).unwrap());
    }

    #[test]
    fn learns_to_avoid_a_static_jammer() {
        let cfg = EnvConfig::desk();
        let obs = Observation::of(&cfg);
        let mut params = AgentParams::desk();
        params.epsilon_decay_hops = 1500;
        let mut agent = DqnAgent::new(params, &obs, 7).unwrap();
        let mut env = Environment::new(cfg).unwrap();
        let jam = [JammerEmission::constant(50.0, &[3], 10)];
        for hop in 1..=2500 {
            let s = Arc::clone(env.state());
            let a = agent.act(&s).unwrap();
            let out = env.step_hop(a, &jam).unwrap();
            agent.observe(&s, a, &out, hop).unwrap();
        }
        for _ in 0..100 {
            let s = Arc::clone(env.state());
            let a = argmax(&agent.learner().q_values(&s).unwrap());
            assert_ne!(a, 3);
            env.step_hop(a, &jam).unwrap();
        }
    }
}
