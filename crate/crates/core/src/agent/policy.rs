use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::SpectrumWaterfall;
use crate::error::{Error, Result};

/// Independent random stream `tag` of a trial seed.
pub fn stream_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest value; ties go to the lowest index.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Per-channel scores `Q[a] / 10^(c[a]/10)`.
pub fn joint_scores(q: &[f64], c_hat: &[f64]) -> Result<Vec<f64>> {
    if q.len() != c_hat.len() || q.is_empty() {
        return Err(Error::Shape {
            layer: "joint_decide".into(),
            expected: vec![q.len()],
            got: vec![c_hat.len()],
        });
    }
    if q.iter().chain(c_hat).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("joint_decide input"));
    }
    Ok(q.iter()
        .zip(c_hat)
        .map(|(&q, &c)| q / 10f64.powf(c / 10.0))
        .collect())
}

/// The channel maximising `Q[a] / 10^(c[a]/10)`, lowest index on ties.
pub fn joint_decide(q: &[f64], c_hat: &[f64]) -> Result<usize> {
    Ok(argmax(&joint_scores(q, c_hat)?))
}

/// `(λ, λ·L^Q + L^C)` with `λ = 1/sqrt(L^C)`, capped at `lambda_max`.
pub fn aggregate_loss(loss_q: f64, loss_c: f64, lambda_max: f64) -> (f64, f64) {
    let lambda = if loss_c > 0.0 {
        (1.0 / loss_c.sqrt()).min(lambda_max)
    } else {
        lambda_max
    };
    (lambda, lambda * loss_q + loss_c)
}

/// Linear decay from `start` to `end` over `span` steps, then constant.
pub fn linear_epsilon(start: f64, end: f64, span: u64, step: u64) -> f64 {
    if span == 0 || step >= span {
        return end;
    }
    start + (end - start) * step as f64 / span as f64
}

/// Uniform random action with probability `epsilon`, else `greedy()`.
pub fn epsilon_greedy<R: Rng + ?Sized>(
    rng: &mut R,
    epsilon: f64,
    actions: usize,
    greedy: impl FnOnce() -> Result<usize>,
) -> Result<usize> {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        Ok(rng.random_range(0..actions))
    } else {
        greedy()
    }
}

/// Maps waterfall dB values affinely so the noise floor is 0 and `floor + span` is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    pub floor_db: f64,
    pub span_db: f64,
}

impl Normalizer {
    pub fn apply(&self, w: &SpectrumWaterfall) -> Vec<f64> {
        let inv = 1.0 / self.span_db;
        w.as_slice()
            .iter()
            .map(|&v| (v - self.floor_db) * inv)
            .collect()
    }
}
