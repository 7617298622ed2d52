use super::Real;
use crate::error::{Error, Result};

/// Numerically stable softmax, reductions in 64-bit.
pub fn softmax<S: Real>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().map(|v| v.f64()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v.f64() - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| S::of(e / sum)).collect()
}

/// Cross-entropy of `softmax(logits)` against a probability vector.
/// Returns the loss and its gradient `softmax(logits) - target`.
pub fn softmax_cross_entropy<S: Real>(logits: &[S], target: &[S]) -> Result<(f64, Vec<S>)> {
    if logits.len() != target.len() || logits.is_empty() {
        return Err(Error::Shape(format!(
            "cross-entropy: {} logits vs {} targets",
            logits.len(),
            target.len()
        )));
    }
    let total: f64 = target.iter().map(|t| t.f64()).sum();
    if (total - 1.0).abs() > 1e-6 || target.iter().any(|t| t.f64() < 0.0) {
        return Err(Error::Invalid(format!(
            "cross-entropy target must be a probability vector (sum {total})"
        )));
    }
    let max = logits.iter().map(|v| v.f64()).fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v.f64() - max).exp()).sum::<f64>().ln();
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (z, t) in logits.iter().zip(target) {
        let (z, t) = (z.f64(), t.f64());
        if t > 0.0 {
            loss -= t * (z - lse);
        }
        grad.push(S::of((z - lse).exp() - t));
    }
    Ok((loss, grad))
}

/// Sum over classes of independent sigmoid cross-entropies.
pub fn binary_cross_entropy<S: Real>(logits: &[S], target: &[S]) -> Result<(f64, Vec<S>)> {
    if logits.len() != target.len() {
        return Err(Error::Shape(format!(
            "binary cross-entropy: {} logits vs {} targets",
            logits.len(),
            target.len()
        )));
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (z, t) in logits.iter().zip(target) {
        let (z, t) = (z.f64(), t.f64());
        // softplus(z) - t z, stable for both signs
        let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
        loss += softplus - t * z;
        grad.push(S::of(sigmoid(z) - t));
    }
    Ok((loss, grad))
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
