use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use super::memory::{ReplayMemory, SampleLabelPair, Transition};
use super::policy::{aggregate_loss, joint_decide, stream_rng, Normalizer};
use super::{AgentParams, ChannelAgent, CoarseLabel, Observation, StepTelemetry};
use crate::env::{HopOutcome, SpectrumWaterfall};
use crate::error::Result;
use crate::nn::{dqn_target, JointCache, JointNet, JointOutput, ParameterSet};

/// How the Q loss is weighted against the prediction loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    /// `λ = 1/sqrt(L^C)`, capped.
    Adaptive,
    Fixed(f64),
}

/// Loss values of one aggregated minibatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossStats {
    pub loss_q: f64,
    pub loss_c: f64,
    pub lambda: f64,
    pub total: f64,
}

/// The joint user: a shared-extractor network with a Q head and a coarse
/// spectrum head, exploring at random until the prediction loss is small.
#[derive(Debug, Clone)]
pub struct JointAgent {
    net: JointNet,
    params: ParameterSet,
    target: ParameterSet,
    d_q: ReplayMemory<Transition>,
    d_c: ReplayMemory<SampleLabelPair>,
    hp: AgentParams,
    normalizer: Normalizer,
    rng: ChaCha8Rng,
    loss_hat: f64,
    cache: JointCache,
}

impl JointAgent {
    pub fn new(hp: AgentParams, obs: &Observation, seed: u64) -> Result<Self> {
        hp.validate()?;
        let mut params = ParameterSet::new();
        let net = JointNet::build(
            &hp.architecture,
            [obs.rows, obs.bins],
            obs.channels,
            obs.channels,
            &mut params,
        )?;
        net.init(&mut params, &mut stream_rng(seed, super::STREAM_INIT));
        Ok(JointAgent {
            net,
            target: params.clone(),
            params,
            d_q: ReplayMemory::new(hp.memory_q),
            d_c: ReplayMemory::new(hp.memory_c),
            loss_hat: hp.loss_init,
            hp,
            normalizer: obs.normalizer,
            rng: stream_rng(seed, super::STREAM_POLICY),
            cache: JointCache::default(),
        })
    }

    pub fn outputs(&self, state: &SpectrumWaterfall) -> Result<JointOutput> {
        self.net
            .forward(&self.params, &self.normalizer.apply(state), None)
    }

    pub fn q_values(&self, state: &SpectrumWaterfall) -> Result<Vec<f64>> {
        Ok(self.outputs(state)?.q)
    }

    pub fn predict_cg(&self, state: &SpectrumWaterfall) -> Result<Vec<f64>> {
        Ok(self.outputs(state)?.c)
    }

    /// The most recent minibatch prediction loss.
    pub fn loss_estimate(&self) -> f64 {
        self.loss_hat
    }

    pub fn set_loss_estimate(&mut self, value: f64) {
        self.loss_hat = value;
    }

    /// True while actions are drawn at random.
    pub fn exploring(&self) -> bool {
        self.loss_hat > self.hp.explore_threshold
    }

    /// The action taken with the gate closed.
    pub fn decide(&self, state: &SpectrumWaterfall) -> Result<usize> {
        let out = self.outputs(state)?;
        joint_decide(&out.q, &out.c)
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

    pub fn network(&self) -> &JointNet {
        &self.net
    }

    pub fn q_memory(&self) -> &ReplayMemory<Transition> {
        &self.d_q
    }

    pub fn c_memory(&self) -> &ReplayMemory<SampleLabelPair> {
        &self.d_c
    }

    /// Stores one hop in both memories.
    pub fn remember(
        &mut self,
        state: &Arc<SpectrumWaterfall>,
        action: usize,
        outcome: &HopOutcome,
    ) {
        self.d_q.push(Transition {
            state: Arc::clone(state),
            action,
            reward: self.hp.shaped_reward(outcome.user_reward),
            next_state: Arc::clone(&outcome.next_state),
        });
        let label = match self.hp.cg_label {
            CoarseLabel::Interference => &outcome.coarse_interference,
            CoarseLabel::Total => &outcome.coarse,
        };
        self.d_c.push(SampleLabelPair {
            state: Arc::clone(state),
            label: label.0.clone(),
        });
    }

    /// Zeroes the gradients and accumulates those of the aggregated loss over
    /// the given minibatches. Either batch may be empty.
    pub fn accumulate_gradients(
        &mut self,
        q_batch: &[&Transition],
        c_batch: &[&SampleLabelPair],
        lambda: LambdaMode,
    ) -> Result<LossStats> {
        self.params.zero_grads();
        let mut loss_c = 0.0;
        let bc = c_batch.len() as f64;
        for pair in c_batch {
            let out = self.net.forward(
                &self.params,
                &self.normalizer.apply(&pair.state),
                Some(&mut self.cache),
            )?;
            let diff: Vec<f64> = out.c.iter().zip(&pair.label).map(|(p, t)| p - t).collect();
            let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
            loss_c += norm / bc;
            if norm > 0.0 {
                let g: Vec<f64> = diff.iter().map(|d| d / (norm * bc)).collect();
                self.net
                    .backward(&mut self.params, &self.cache, None, Some(&g))?;
            }
        }
        let lambda = match lambda {
            LambdaMode::Adaptive => aggregate_loss(0.0, loss_c, self.hp.lambda_max).0,
            LambdaMode::Fixed(l) => l,
        };
        let mut loss_q = 0.0;
        let bq = q_batch.len() as f64;
        for t in q_batch {
            let next = self
                .net
                .forward_q(&self.target, &self.normalizer.apply(&t.next_state))?;
            let eta = dqn_target(t.reward, self.hp.gamma, &next);
            let out = self.net.forward(
                &self.params,
                &self.normalizer.apply(&t.state),
                Some(&mut self.cache),
            )?;
            let err = eta - out.q[t.action];
            loss_q += err * err / bq;
            if lambda != 0.0 {
                let mut g = vec![0.0; out.q.len()];
                g[t.action] = -2.0 * err / bq * lambda;
                self.net
                    .backward(&mut self.params, &self.cache, Some(&g), None)?;
            }
        }
        Ok(LossStats {
            loss_q,
            loss_c,
            lambda,
            total: lambda * loss_q + loss_c,
        })
    }

    /// Applies the accumulated gradients: `q.*` at `alpha_q`, `c.*` at
    /// `alpha_c`, and the shared extractor at their sum.
    pub fn apply_gradients(&mut self) {
        let (aq, ac) = (self.hp.alpha_q, self.hp.alpha_c);
        self.params.sgd_step_with(|name| {
            if name.starts_with("q.") {
                aq
            } else if name.starts_with("c.") {
                ac
            } else {
                aq + ac
            }
        });
    }

    /// One aggregated training step if both memories exceed their batch sizes.
    pub fn train_step(&mut self, lambda: LambdaMode) -> Result<Option<LossStats>> {
        if self.d_q.len() <= self.hp.batch_q || self.d_c.len() <= self.hp.batch_c {
            return Ok(None);
        }
        let ci = self.d_c.sample_indices(self.hp.batch_c, &mut self.rng);
        let qi = self.d_q.sample_indices(self.hp.batch_q, &mut self.rng);
        // The batches are cloned handles so the memories stay borrowable.
        let c_batch: Vec<SampleLabelPair> = ci
            .iter()
            .map(|&i| self.d_c.get(i).expect("index").clone())
            .collect();
        let q_batch: Vec<Transition> = qi
            .iter()
            .map(|&i| self.d_q.get(i).expect("index").clone())
            .collect();
        let c_refs: Vec<&SampleLabelPair> = c_batch.iter().collect();
        let q_refs: Vec<&Transition> = q_batch.iter().collect();
        let stats = self.accumulate_gradients(&q_refs, &c_refs, lambda)?;
        self.apply_gradients();
        self.loss_hat = stats.loss_c;
        Ok(Some(stats))
    }

    pub fn sync_target(&mut self) {
        self.target.copy_values_from(&self.params);
    }
}

impl ChannelAgent for JointAgent {
    fn act(&mut self, state: &Arc<SpectrumWaterfall>) -> Result<usize> {
        if self.exploring() {
            use rand::Rng;
            Ok(self.rng.random_range(0..self.net.q_outputs()))
        } else {
            self.decide(state)
        }
    }

    fn observe(
        &mut self,
        state: &Arc<SpectrumWaterfall>,
        action: usize,
        outcome: &HopOutcome,
        hop: u64,
    ) -> Result<StepTelemetry> {
        self.remember(state, action, outcome);
        let stats = self.train_step(LambdaMode::Adaptive)?;
        if hop.is_multiple_of(self.hp.target_sync_hops) {
            self.sync_target();
        }
        Ok(match stats {
            Some(s) => StepTelemetry {
                loss_q: Some(s.loss_q),
                loss_c: Some(s.loss_c),
                lambda: Some(s.lambda),
            },
            None => StepTelemetry::default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, Environment};
    use crate::jammer::{FixedJammer, FixedJammerConfig, FixedMode};
    use rand::Rng;

    fn setup(seed: u64) -> (JointAgent, Vec<(Arc<SpectrumWaterfall>, usize, HopOutcome)>) {
        let cfg = EnvConfig::desk();
        let agent = JointAgent::new(AgentParams::desk(), &Observation::of(&cfg), seed).unwrap();
        let jammer =
            FixedJammer::new(FixedJammerConfig::of_mode(FixedMode::Sweep), &cfg, seed).unwrap();
        let mut env = Environment::new(cfg).unwrap();
        let mut rng = stream_rng(seed, 99);
        let mut history = Vec::new();
        let mut hops = Vec::new();
        for hop in 0..40 {
            let state = Arc::clone(env.state());
            let a = rng.random_range(0..10);
            let out = env.step_hop(a, &[jammer.emission(hop, &history)]).unwrap();
            history.push(a);
            hops.push((state, a, out));
        }
        (agent, hops)
    }

    fn grads(p: &ParameterSet) -> Vec<(String, Vec<f64>)> {
        p.ids()
            .map(|id| (p.name(id).to_owned(), p.grad(id).data().to_vec()))
            .collect()
    }

    fn values(p: &ParameterSet) -> Vec<(String, Vec<f64>)> {
        p.ids()
            .map(|id| (p.name(id).to_owned(), p.value(id).data().to_vec()))
            .collect()
    }

    fn filled(seed: u64) -> JointAgent {
        let (mut agent, hops) = setup(seed);
        for (s, a, o) in &hops {
            agent.remember(s, *a, o);
        }
        agent
    }

    #[test]
    fn fresh_agent_acts_uniformly() {
        let (mut agent, hops) = setup(1);
        assert_eq!(agent.loss_estimate(), 100.0);
        let mut counts = [0usize; 10];
        for _ in 0..10_000 {
            counts[agent.act(&hops[0].0).unwrap()] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - 1000.0).powi(2) / 1000.0)
            .sum();
        assert!(chi2 < 9.0 + 3.0 * 18f64.sqrt(), "chi2 {chi2}");
    }

    #[test]
    fn closed_gate_follows_the_joint_decision() {
        let (mut agent, hops) = setup(2);
        assert_eq!(agent.network().q_outputs(), 10);
        let q_bias = agent
            .params()
            .names()
            .filter(|n| n.starts_with("q.") && n.ends_with(".b"))
            .last()
            .unwrap()
            .to_owned();
        let c_bias = agent
            .params()
            .names()
            .filter(|n| n.starts_with("c.") && n.ends_with(".b"))
            .last()
            .unwrap()
            .to_owned();
        let names: Vec<String> = agent.params().names().map(str::to_owned).collect();
        for n in names
            .iter()
            .filter(|n| n.starts_with("q.") || n.starts_with("c."))
        {
            agent.params_mut().get_mut(n).unwrap().fill(0.0);
        }
        let q: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
        let c: Vec<f64> = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 20.0];
        agent
            .params_mut()
            .get_mut(&q_bias)
            .unwrap()
            .data_mut()
            .copy_from_slice(&q);
        agent
            .params_mut()
            .get_mut(&c_bias)
            .unwrap()
            .data_mut()
            .copy_from_slice(&c);
        agent.set_loss_estimate(5.0);
        for (s, _, _) in &hops {
            assert_eq!(agent.act(s).unwrap(), 8);
            assert_eq!(agent.decide(s).unwrap(), joint_decide(&q, &c).unwrap());
        }
    }

    #[test]
    fn gate_switches_source_at_the_crossing_hop() {
        let (mut agent, hops) = setup(3);
        let schedule = [100.0, 50.0, 10.5, 10.0, 9.9, 5.0, 10.0 + 1e-9, 12.0, 3.0];
        for (i, &loss) in schedule.iter().enumerate() {
            agent.set_loss_estimate(loss);
            let state = &hops[i].0;
            let mut probe = agent.rng.clone();
            let expected = if loss > 10.0 {
                probe.random_range(0..10)
            } else {
                agent.decide(state).unwrap()
            };
            assert_eq!(agent.act(state).unwrap(), expected, "hop {i}");
            assert_eq!(agent.exploring(), loss > 10.0);
        }
    }

    #[test]
    fn aggregate_loss_examples() {
        assert_eq!(aggregate_loss(4.0, 100.0, 1e3), (0.1, 100.4));
        assert_eq!(aggregate_loss(7.0, 1.0, 1e3), (1.0, 8.0));
    }

    #[test]
    fn no_training_before_memories_exceed_their_batches() {
        let (mut agent, hops) = setup(4);
        let before = values(agent.params());
        let batch = agent.hp.batch_q.max(agent.hp.batch_c);
        for (i, (s, a, o)) in hops.iter().take(batch).enumerate() {
            let t = agent.observe(s, *a, o, i as u64 + 1).unwrap();
            assert_eq!(t, StepTelemetry::default());
        }
        assert_eq!(values(agent.params()), before);
        assert_eq!(agent.loss_estimate(), 100.0);
        let (s, a, o) = &hops[batch];
        let t = agent.observe(s, *a, o, batch as u64 + 1).unwrap();
        assert!(t.loss_c.is_some());
        assert_ne!(values(agent.params()), before);
        assert_eq!(agent.loss_estimate(), t.loss_c.unwrap());
    }

    #[test]
    fn target_syncs_only_at_multiples_of_the_interval() {
        let (mut agent, hops) = setup(5);
        agent.hp.target_sync_hops = 7;
        let mut snapshot = values(agent.target_params());
        for (i, (s, a, o)) in hops.iter().enumerate() {
            let hop = i as u64 + 1;
            agent.observe(s, *a, o, hop).unwrap();
            let now = values(agent.target_params());
            if hop.is_multiple_of(7) {
                assert_eq!(now, values(agent.params()), "hop {hop}");
                snapshot = now;
            } else {
                assert_eq!(now, snapshot, "hop {hop}");
            }
        }
    }

    #[test]
    fn zero_lambda_step_matches_a_prediction_only_step() {
        let agent = filled(6);
        let q: Vec<&Transition> = agent.q_memory().iter().take(8).collect();
        let c: Vec<&SampleLabelPair> = agent.c_memory().iter().skip(3).take(8).collect();
        let (q, c): (Vec<Transition>, Vec<SampleLabelPair>) = (
            q.into_iter().cloned().collect(),
            c.into_iter().cloned().collect(),
        );
        let (qr, cr): (Vec<&Transition>, Vec<&SampleLabelPair>) =
            (q.iter().collect(), c.iter().collect());

        let mut joint = agent.clone();
        joint
            .accumulate_gradients(&qr, &cr, LambdaMode::Fixed(0.0))
            .unwrap();
        joint.apply_gradients();
        let mut pred = agent.clone();
        pred.accumulate_gradients(&[], &cr, LambdaMode::Fixed(0.0))
            .unwrap();
        pred.apply_gradients();

        let start = values(agent.params());
        let last_q = agent
            .params()
            .names()
            .filter(|n| n.starts_with("q."))
            .last()
            .unwrap();
        let q_head = last_q[..last_q.rfind('.').unwrap() + 1].to_owned();
        for ((name, a), ((_, b), (_, s))) in values(joint.params())
            .into_iter()
            .zip(values(pred.params()).into_iter().zip(start))
        {
            assert_eq!(a, b, "{name}");
            if name.starts_with(&q_head) {
                assert_eq!(a, s, "{name}");
            }
        }
    }

    #[test]
    fn extractor_gradients_add_across_heads() {
        let agent = filled(7);
        let q: Vec<Transition> = agent.q_memory().iter().skip(5).take(8).cloned().collect();
        let c: Vec<SampleLabelPair> = agent.c_memory().iter().skip(11).take(8).cloned().collect();
        let (qr, cr): (Vec<&Transition>, Vec<&SampleLabelPair>) =
            (q.iter().collect(), c.iter().collect());

        let mut full = agent.clone();
        let stats = full
            .accumulate_gradients(&qr, &cr, LambdaMode::Adaptive)
            .unwrap();
        let lambda = stats.lambda;
        assert!(lambda > 0.0);
        let mut q_only = agent.clone();
        q_only
            .accumulate_gradients(&qr, &[], LambdaMode::Fixed(1.0))
            .unwrap();
        let mut c_only = agent.clone();
        c_only
            .accumulate_gradients(&[], &cr, LambdaMode::Fixed(0.0))
            .unwrap();

        let mut checked = 0;
        for (((name, g), (_, gq)), (_, gc)) in grads(full.params())
            .into_iter()
            .zip(grads(q_only.params()))
            .zip(grads(c_only.params()))
        {
            for ((a, b), c) in g.iter().zip(&gq).zip(&gc) {
                let expected = lambda * b + c;
                let scale = a.abs().max(expected.abs()).max(1e-300);
                assert!(
                    (a - expected).abs() / scale <= 1e-10 || (a - expected).abs() < 1e-14,
                    "{name}"
                );
            }
            if !name.starts_with("q.") && !name.starts_with("c.") {
                assert!(
                    gq.iter().any(|v| *v != 0.0) && gc.iter().any(|v| *v != 0.0),
                    "{name}"
                );
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}
