//! Loss functions with their gradients with respect to the network outputs.

/// Batch RMSE: the mean over samples of `||pred - target||`.
///
/// Returns the loss and, per sample, the gradient of the *batch* loss with
/// respect to that sample's prediction, `(pred - target) / (||pred - target|| * B)`.
/// At `pred == target` the gradient is the zero vector.
pub fn rmse_loss(preds: &[Vec<f64>], targets: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
    assert_eq!(preds.len(), targets.len(), "batch sizes differ");
    if preds.is_empty() {
        return (0.0, Vec::new());
    }
    let b = preds.len() as f64;
    let mut total = 0.0;
    let grads = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            assert_eq!(p.len(), t.len(), "prediction and label lengths differ");
            let diff: Vec<f64> = p.iter().zip(t).map(|(a, b)| a - b).collect();
            let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
            total += norm;
            if norm > 0.0 {
                diff.iter().map(|d| d / (norm * b)).collect()
            } else {
                vec![0.0; diff.len()]
            }
        })
        .collect();
    (total / b, grads)
}

/// Batch DQN loss: the mean over samples of `(target - q[action])^2`.
///
/// The gradient is nonzero only at each sample's taken action.
pub fn dqn_loss(q_preds: &[Vec<f64>], actions: &[usize], targets: &[f64]) -> (f64, Vec<Vec<f64>>) {
    assert!(q_preds.len() == actions.len() && actions.len() == targets.len());
    if q_preds.is_empty() {
        return (0.0, Vec::new());
    }
    let b = q_preds.len() as f64;
    let mut total = 0.0;
    let grads = q_preds
        .iter()
        .zip(actions)
        .zip(targets)
        .map(|((q, &a), &eta)| {
            assert!(a < q.len(), "action {a} out of range");
            let err = eta - q[a];
            total += err * err;
            let mut g = vec![0.0; q.len()];
            g[a] = -2.0 * err / b;
            g
        })
        .collect();
    (total / b, grads)
}

/// `r + gamma * max_a' q_next[a']`
pub fn dqn_target(reward: f64, gamma: f64, q_next: &[f64]) -> f64 {
    let best = q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    reward + gamma * best
}
