//! Central finite-difference checks of every analytic gradient.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{concat_backward, concat_forward, LayerSpec, SeqCache, Sequential};
use super::loss::{dqn_loss, rmse_loss};
use super::params::ParameterSet;

pub const EPSILON: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Conv2d,
    FullyConnected,
    Relu,
    Concat,
    RmseLoss,
    DqnLoss,
}

impl CheckKind {
    pub const ALL: [CheckKind; 6] = [
        CheckKind::Conv2d,
        CheckKind::FullyConnected,
        CheckKind::Relu,
        CheckKind::Concat,
        CheckKind::RmseLoss,
        CheckKind::DqnLoss,
    ];
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CheckKind::Conv2d => "conv2d",
            CheckKind::FullyConnected => "fully_connected",
            CheckKind::Relu => "relu",
            CheckKind::Concat => "concat",
            CheckKind::RmseLoss => "rmse_loss",
            CheckKind::DqnLoss => "dqn_loss",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckResult {
    pub kind: CheckKind,
    pub seed: u64,
    pub max_rel_error: f64,
    pub entries: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error < TOLERANCE
    }
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-7);
    (analytic - numeric).abs() / scale
}

/// `(f(x + eps) - f(x - eps)) / (2 eps)` for one coordinate.
fn central(x: &mut [f64], i: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + EPSILON;
    let up = f(x);
    x[i] = orig - EPSILON;
    let down = f(x);
    x[i] = orig;
    (up - down) / (2.0 * EPSILON)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Values bounded away from zero, so ReLU kinks stay outside `±EPSILON`.
fn off_kink(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.random_range(0.05..1.0);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

/// Checks a single-layer stack: gradients w.r.t. every parameter and input
/// of the projection `L = <r, layer(x)>` for random `r`.
fn check_layer(spec: LayerSpec, input_shape: &[usize], rng: &mut ChaCha8Rng) -> (f64, usize) {
    let mut params = ParameterSet::new();
    let seq = Sequential::build("g", &[spec], input_shape, &mut params).expect("valid layer");
    seq.init(&mut params, rng);
    for id in params.ids().collect::<Vec<_>>() {
        let n = params.value(id).len();
        params
            .value_mut(id)
            .data_mut()
            .copy_from_slice(&uniform(rng, n));
    }
    let mut x = if spec == LayerSpec::Relu {
        off_kink(rng, seq.input_len())
    } else {
        uniform(rng, seq.input_len())
    };
    let r = uniform(rng, seq.output_len());
    let objective = |p: &ParameterSet, x: &[f64]| -> f64 {
        let y = seq.forward(p, x, None).expect("forward");
        y.iter().zip(&r).map(|(a, b)| a * b).sum()
    };

    let mut cache = SeqCache::default();
    seq.forward(&params, &x, Some(&mut cache)).expect("forward");
    let dx = seq
        .backward(&mut params, &cache, &r, true)
        .expect("backward")
        .expect("input grad");

    let mut worst: f64 = 0.0;
    let mut entries = 0;
    for (i, &d) in dx.iter().enumerate() {
        let num = central(&mut x, i, |xx| objective(&params, xx));
        worst = worst.max(rel_error(d, num));
        entries += 1;
    }
    for id in params.ids().collect::<Vec<_>>() {
        let analytic = params.grad(id).data().to_vec();
        let mut values = params.value(id).data().to_vec();
        for (i, &a) in analytic.iter().enumerate() {
            let num = central(&mut values, i, |v| {
                let mut p = params.clone();
                p.value_mut(id).data_mut().copy_from_slice(v);
                objective(&p, &x)
            });
            worst = worst.max(rel_error(a, num));
            entries += 1;
        }
    }
    (worst, entries)
}

fn check_concat(rng: &mut ChaCha8Rng) -> (f64, usize) {
    let na = rng.random_range(1..8);
    let nb = rng.random_range(1..8);
    let mut a = uniform(rng, na);
    let mut b = uniform(rng, nb);
    let r = uniform(rng, na + nb);
    let proj = |a: &[f64], b: &[f64]| -> f64 {
        concat_forward(a, b)
            .iter()
            .zip(&r)
            .map(|(x, y)| x * y)
            .sum()
    };
    let (ga, gb) = concat_backward(&r, na);
    let (ga, gb) = (ga.to_vec(), gb.to_vec());
    let mut worst: f64 = 0.0;
    for (i, &g) in ga.iter().enumerate() {
        let bb = b.clone();
        worst = worst.max(rel_error(g, central(&mut a, i, |aa| proj(aa, &bb))));
    }
    for (i, &g) in gb.iter().enumerate() {
        let aa = a.clone();
        worst = worst.max(rel_error(g, central(&mut b, i, |bb| proj(&aa, bb))));
    }
    (worst, na + nb)
}

fn check_rmse(rng: &mut ChaCha8Rng) -> (f64, usize) {
    let batch = rng.random_range(1..5);
    let m = rng.random_range(2..12);
    let targets: Vec<Vec<f64>> = (0..batch).map(|_| uniform(rng, m)).collect();
    let preds: Vec<Vec<f64>> = (0..batch).map(|_| uniform(rng, m)).collect();
    let (_, grads) = rmse_loss(&preds, &targets);
    let mut flat: Vec<f64> = preds.concat();
    let mut worst: f64 = 0.0;
    for i in 0..flat.len() {
        let num = central(&mut flat, i, |f| {
            let p: Vec<Vec<f64>> = f.chunks(m).map(<[f64]>::to_vec).collect();
            rmse_loss(&p, &targets).0
        });
        worst = worst.max(rel_error(grads[i / m][i % m], num));
    }
    (worst, flat.len())
}

fn check_dqn(rng: &mut ChaCha8Rng) -> (f64, usize) {
    let batch = rng.random_range(1..6);
    let m = rng.random_range(2..12);
    let preds: Vec<Vec<f64>> = (0..batch).map(|_| uniform(rng, m)).collect();
    let actions: Vec<usize> = (0..batch).map(|_| rng.random_range(0..m)).collect();
    let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-3.0..3.0)).collect();
    let (_, grads) = dqn_loss(&preds, &actions, &targets);
    let mut flat: Vec<f64> = preds.concat();
    let mut worst: f64 = 0.0;
    for i in 0..flat.len() {
        let num = central(&mut flat, i, |f| {
            let p: Vec<Vec<f64>> = f.chunks(m).map(<[f64]>::to_vec).collect();
            dqn_loss(&p, &actions, &targets).0
        });
        worst = worst.max(rel_error(grads[i / m][i % m], num));
    }
    (worst, flat.len())
}

pub fn check(kind: CheckKind, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (max_rel_error, entries) = match kind {
        CheckKind::Conv2d => {
            let kernel = rng.random_range(1..5);
            let stride = rng.random_range(1..=kernel.min(2));
            let channels = rng.random_range(1..3);
            let filters = rng.random_range(1..4);
            let side = rng.random_range(kernel + 1..kernel + 6);
            check_layer(
                LayerSpec::conv(kernel, stride, filters),
                &[channels, side, side],
                &mut rng,
            )
        }
        CheckKind::FullyConnected => {
            let inputs = rng.random_range(1..12);
            let outputs = rng.random_range(1..8);
            check_layer(
                LayerSpec::FullyConnected { inputs, outputs },
                &[inputs],
                &mut rng,
            )
        }
        CheckKind::Relu => {
            let n = rng.random_range(1..32);
            check_layer(LayerSpec::Relu, &[n], &mut rng)
        }
        CheckKind::Concat => check_concat(&mut rng),
        CheckKind::RmseLoss => check_rmse(&mut rng),
        CheckKind::DqnLoss => check_dqn(&mut rng),
    };
    CheckResult {
        kind,
        seed,
        max_rel_error,
        entries,
    }
}

/// Every kind over `seeds` seeds starting at `base_seed`.
pub fn run_suite(base_seed: u64, seeds: u64) -> Vec<CheckResult> {
    CheckKind::ALL
        .iter()
        .flat_map(|&k| (base_seed..base_seed + seeds).map(move |s| check(k, s)))
        .collect()
}
