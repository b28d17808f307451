use std::sync::Arc;

use super::config::{AgentKind, ExperimentConfig, JammerSpec};
use super::metrics::{EpisodeMetrics, HopRecord};
use crate::agent::{
    ChannelAgent, DqnAgent, JointAgent, Observation, PredictorAgent, RandomFh, StepTelemetry,
};
use crate::env::{Environment, HopOutcome};
use crate::error::Result;
use crate::jammer::{FixedJammer, IntelligentJammer, Jammer};

/// Stream offset separating jammer seeds from the user's.
pub const JAMMER_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

/// Everything recorded for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: u64,
    pub seed: u64,
    pub episodes: Vec<EpisodeMetrics>,
    pub telemetry: Vec<HopRecord>,
}

impl TrialResult {
    /// First 1-based episode whose throughput reaches `target`.
    pub fn episodes_to_target(&self, target: f64) -> Option<u64> {
        self.episodes
            .iter()
            .find(|e| e.normalized_throughput >= target)
            .map(|e| e.episode)
    }

    /// First 1-based episode of a run of `len` consecutive episodes at or above `target`.
    pub fn sustained_from(&self, target: f64, len: u64) -> Option<u64> {
        let mut run = 0;
        for e in &self.episodes {
            if e.normalized_throughput >= target {
                run += 1;
                if run == len {
                    return Some(e.episode + 1 - len);
                }
            } else {
                run = 0;
            }
        }
        None
    }

    /// Mean throughput over 1-based episodes `first..=last` that were run.
    pub fn mean_throughput(&self, first: u64, last: u64) -> Option<f64> {
        let xs: Vec<f64> = self
            .episodes
            .iter()
            .filter(|e| e.episode >= first && e.episode <= last)
            .map(|e| e.normalized_throughput)
            .collect();
        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// All trials of an experiment, in trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
}

fn build_agent(
    cfg: &ExperimentConfig,
    obs: &Observation,
    seed: u64,
) -> Result<Box<dyn ChannelAgent>> {
    let hp = cfg.agent_params.clone();
    Ok(match cfg.agent {
        AgentKind::RandomFh => {
            Box::new(RandomFh::new(cfg.env.channels, cfg.sequence_length, seed)?)
        }
        AgentKind::Dqn => Box::new(DqnAgent::new(hp, obs, seed)?),
        AgentKind::PredictorOnly => Box::new(PredictorAgent::new(hp, obs, seed)?),
        AgentKind::Joint => Box::new(JointAgent::new(hp, obs, seed)?),
    })
}

fn build_jammers(cfg: &ExperimentConfig, obs: &Observation, seed: u64) -> Result<Vec<Jammer>> {
    cfg.jammers
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let s = seed.wrapping_add(JAMMER_SEED_OFFSET).wrapping_add(i as u64);
            Ok(match spec {
                JammerSpec::Fixed(f) => Jammer::Fixed(FixedJammer::new(f.clone(), &cfg.env, s)?),
                JammerSpec::Intelligent(c) => {
                    Jammer::Intelligent(Box::new(IntelligentJammer::new(
                        c.clone(),
                        &cfg.agent_params,
                        obs,
                        cfg.env.slots_per_hop,
                        s,
                    )?))
                }
            })
        })
        .collect()
}

#[derive(Default)]
struct EpisodeAccumulator {
    hops: u64,
    acks: u64,
    reward: f64,
    loss_q: (f64, u64),
    loss_c: (f64, u64),
}

impl EpisodeAccumulator {
    fn add(&mut self, out: &HopOutcome, tel: &StepTelemetry) {
        self.hops += 1;
        self.acks += u64::from(out.ack);
        self.reward += out.user_reward;
        if let Some(l) = tel.loss_q {
            self.loss_q.0 += l;
            self.loss_q.1 += 1;
        }
        if let Some(l) = tel.loss_c {
            self.loss_c.0 += l;
            self.loss_c.1 += 1;
        }
    }

    fn finish(self, episode: u64) -> EpisodeMetrics {
        let mean = |(s, n): (f64, u64)| (n > 0).then(|| s / n as f64);
        EpisodeMetrics {
            episode,
            hops: self.hops,
            normalized_throughput: normalized_throughput_counts(self.acks, self.hops),
            mean_user_reward: self.reward / self.hops as f64,
            mean_loss_q: mean(self.loss_q),
            mean_loss_c: mean(self.loss_c),
        }
    }
}

/// ACK count over hop count.
pub fn normalized_throughput_counts(acks: u64, hops: u64) -> f64 {
    acks as f64 / hops as f64
}

/// Fraction of acknowledged hops.
pub fn normalized_throughput(acks: &[bool]) -> f64 {
    normalized_throughput_counts(
        acks.iter().filter(|&&a| a).count() as u64,
        acks.len() as u64,
    )
}

/// Runs trial `trial` of `cfg` on the current thread.
pub fn run_trial(cfg: &ExperimentConfig, trial: u64) -> Result<TrialResult> {
    let seed = cfg.trial_seed(trial);
    let mut env_cfg = cfg.env.clone();
    env_cfg.seed = seed;
    let obs = Observation::with_span(&env_cfg, cfg.agent_params.input_span_db);
    let mut env = Environment::new(env_cfg)?;
    let mut agent = build_agent(cfg, &obs, seed)?;
    let mut jammers = build_jammers(cfg, &obs, seed)?;
    let record = cfg.telemetry_path.is_some();

    let mut history: Vec<usize> = Vec::new();
    let mut episodes = Vec::new();
    let mut telemetry = Vec::new();
    let mut sustained = 0;
    let mut hop: u64 = 0;
    for episode in 1..=cfg.episodes {
        let mut acc = EpisodeAccumulator::default();
        for _ in 0..cfg.hops_per_episode {
            let state = Arc::clone(env.state());
            let action = agent.act(&state)?;
            let emissions = jammers
                .iter_mut()
                .map(|j| j.emission(hop, &state, &history))
                .collect::<Result<Vec<_>>>()?;
            let outcome = env.step_hop(action, &emissions)?;
            hop += 1;
            history.push(action);
            let tel = agent.observe(&state, action, &outcome, hop)?;
            for j in jammers.iter_mut() {
                j.observe(&outcome, hop)?;
            }
            if record {
                telemetry.push(HopRecord {
                    trial,
                    episode,
                    hop,
                    action,
                    ack: outcome.ack,
                    user_reward: outcome.user_reward,
                    loss_q: tel.loss_q,
                    loss_c: tel.loss_c,
                    lambda: tel.lambda,
                });
            }
            acc.add(&outcome, &tel);
        }
        let m = acc.finish(episode);
        let reached = m.normalized_throughput >= cfg.target_throughput;
        episodes.push(m);
        sustained = if reached { sustained + 1 } else { 0 };
        if cfg.stop_after_sustained.is_some_and(|k| sustained >= k) {
            break;
        }
    }
    Ok(TrialResult {
        trial,
        seed,
        episodes,
        telemetry,
    })
}

/// Runs every trial, spread over `cfg.threads` workers, and returns them in trial order.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let n = cfg.trials as usize;
    let workers = cfg.threads.min(n).max(1);
    let mut slots: Vec<Option<Result<TrialResult>>> = (0..n).map(|_| None).collect();
    if workers == 1 {
        for (t, slot) in slots.iter_mut().enumerate() {
            *slot = Some(run_trial(cfg, t as u64));
        }
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    scope.spawn(move || {
                        (w..n)
                            .step_by(workers)
                            .map(|t| (t, run_trial(cfg, t as u64)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (t, r) in h.join().expect("trial worker panicked") {
                    slots[t] = Some(r);
                }
            }
        });
    }
    let trials = slots
        .into_iter()
        .map(|s| s.expect("every trial ran"))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        config: cfg.clone(),
        trials,
    })
}
