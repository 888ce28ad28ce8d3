//! Negative log-likelihood heads for discrete and continuous actions.

use std::f64::consts::PI;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-log softmax(logits)[action]` and its gradient `softmax - one_hot`.
pub fn softmax_nll(logits: &[f64], action: usize) -> (f64, Vec<f64>) {
    assert!(action < logits.len(), "action index out of range");
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logits.iter().map(|&l| (l - max).exp()).sum();
    let log_norm = max + total.ln();
    let loss = log_norm - logits[action];
    let mut grad: Vec<f64> = logits.iter().map(|&l| (l - log_norm).exp()).collect();
    grad[action] -= 1.0;
    (loss, grad)
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Output of [`gaussian_nll`].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNll {
    pub loss: f64,
    pub mean_grad: Vec<f64>,
    pub log_std_grad: Vec<f64>,
}

/// Diagonal Gaussian negative log-likelihood of `action`,
/// `Σ_d log σ_d + ½ log 2π + (a_d − μ_d)² / (2σ_d²)`, with σ = exp(log_std).
pub fn gaussian_nll(mean: &[f64], log_std: &[f64], action: &[f64]) -> GaussianNll {
    assert_eq!(mean.len(), action.len(), "action/mean length mismatch");
    assert_eq!(
        log_std.len(),
        action.len(),
        "action/log_std length mismatch"
    );
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    let mut loss = 0.0;
    let mut mean_grad = Vec::with_capacity(mean.len());
    let mut log_std_grad = Vec::with_capacity(mean.len());
    for ((&mu, &ls), &a) in mean.iter().zip(log_std).zip(action) {
        let inv_var = (-2.0 * ls).exp();
        let diff = a - mu;
        let z2 = diff * diff * inv_var;
        loss += ls + half_log_2pi + 0.5 * z2;
        mean_grad.push(-diff * inv_var);
        log_std_grad.push(1.0 - z2);
    }
    GaussianNll {
        loss,
        mean_grad,
        log_std_grad,
    }
}
