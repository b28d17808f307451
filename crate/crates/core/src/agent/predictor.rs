use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::memory::{ReplayMemory, SampleLabelPair};
use super::policy::{argmin, stream_rng, Normalizer};
use super::{AgentParams, ChannelAgent, CoarseLabel, Observation, StepTelemetry};
use crate::env::{HopOutcome, SpectrumWaterfall};
use crate::error::Result;
use crate::nn::{ParameterSet, SingleCache, SingleNet};

/// Coarse spectrum regression network trained on the RMSE loss.
#[derive(Debug, Clone)]
pub struct CgPredictor {
    net: SingleNet,
    params: ParameterSet,
    memory: ReplayMemory<SampleLabelPair>,
    normalizer: Normalizer,
    batch: usize,
    learning_rate: f64,
    cache: SingleCache,
}

impl CgPredictor {
    pub fn new<R: Rng + ?Sized>(hp: &AgentParams, obs: &Observation, rng: &mut R) -> Result<Self> {
        let mut params = ParameterSet::new();
        let net = SingleNet::build(
            &hp.architecture,
            [obs.rows, obs.bins],
            obs.channels,
            &mut params,
        )?;
        net.init(&mut params, rng);
        Ok(CgPredictor {
            net,
            params,
            memory: ReplayMemory::new(hp.memory_c),
            normalizer: obs.normalizer,
            batch: hp.batch_c,
            learning_rate: hp.alpha_c,
            cache: SingleCache::default(),
        })
    }

    pub fn predict(&self, state: &SpectrumWaterfall) -> Result<Vec<f64>> {
        self.net
            .forward(&self.params, &self.normalizer.apply(state), None)
    }

    pub fn remember(&mut self, pair: SampleLabelPair) {
        self.memory.push(pair);
    }

    pub fn ready(&self) -> bool {
        self.memory.len() > self.batch
    }

    /// One SGD step on a random minibatch; returns the minibatch RMSE loss.
    pub fn train_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        let idx = self.memory.sample_indices(self.batch, rng);
        let b = idx.len() as f64;
        let mut loss = 0.0;
        self.params.zero_grads();
        for i in idx {
            let pair = self.memory.get(i).expect("sampled index");
            let pred = self.net.forward(
                &self.params,
                &self.normalizer.apply(&pair.state),
                Some(&mut self.cache),
            )?;
            let diff: Vec<f64> = pred.iter().zip(&pair.label).map(|(p, t)| p - t).collect();
            let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
            loss += norm / b;
            if norm > 0.0 {
                let g: Vec<f64> = diff.iter().map(|d| d / (norm * b)).collect();
                self.net.backward(&mut self.params, &self.cache, &g)?;
            }
        }
        self.params.sgd_step(self.learning_rate);
        Ok(loss)
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }
}

/// Ablation user: explores while the prediction loss is large, then picks the
/// channel with the smallest predicted power.
#[derive(Debug, Clone)]
pub struct PredictorAgent {
    predictor: CgPredictor,
    hp: AgentParams,
    rng: ChaCha8Rng,
    channels: usize,
    loss_hat: f64,
}

impl PredictorAgent {
    pub fn new(hp: AgentParams, obs: &Observation, seed: u64) -> Result<Self> {
        hp.validate()?;
        let predictor = CgPredictor::new(&hp, obs, &mut stream_rng(seed, super::STREAM_INIT))?;
        Ok(PredictorAgent {
            predictor,
            loss_hat: hp.loss_init,
            hp,
            rng: stream_rng(seed, super::STREAM_POLICY),
            channels: obs.channels,
        })
    }

    pub fn predictor(&self) -> &CgPredictor {
        &self.predictor
    }

    pub fn predictor_mut(&mut self) -> &mut CgPredictor {
        &mut self.predictor
    }

    pub fn loss_estimate(&self) -> f64 {
        self.loss_hat
    }

    pub fn set_loss_estimate(&mut self, value: f64) {
        self.loss_hat = value;
    }

    pub fn exploring(&self) -> bool {
        self.loss_hat > self.hp.explore_threshold
    }
}

impl ChannelAgent for PredictorAgent {
    fn act(&mut self, state: &Arc<SpectrumWaterfall>) -> Result<usize> {
        if self.exploring() {
            Ok(self.rng.random_range(0..self.channels))
        } else {
            Ok(argmin(&self.predictor.predict(state)?))
        }
    }

    fn observe(
        &mut self,
        state: &Arc<SpectrumWaterfall>,
        _action: usize,
        outcome: &HopOutcome,
        _hop: u64,
    ) -> Result<StepTelemetry> {
        let label = match self.hp.cg_label {
            CoarseLabel::Interference => &outcome.coarse_interference,
            CoarseLabel::Total => &outcome.coarse,
        };
        self.predictor.remember(SampleLabelPair {
            state: Arc::clone(state),
            label: label.0.clone(),
        });
        let mut tel = StepTelemetry::default();
        if self.predictor.ready() {
            let l = self.predictor.train_step(&mut self.rng)?;
            self.loss_hat = l;
            tel.loss_c = Some(l);
        }
        Ok(tel)
    }
}
