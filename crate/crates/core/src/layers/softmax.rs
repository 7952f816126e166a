use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Max-shifted softmax probabilities.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Cross-entropy of `label` under softmax(`logits`). Returns `(loss, probs)`.
pub fn softmax_xent(logits: &Tensor, label: usize) -> Result<(f64, Tensor)> {
    let k = logits.len();
    if label >= k {
        return Err(Error::param(format!("label {label} out of range for {k} classes")));
    }
    let z = logits.data();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    let loss = -(z[label] - max - log_sum);
    Ok((loss, Tensor::new(logits.dims().to_vec(), softmax(z))?))
}

/// Gradient of the loss w.r.t. the logits: `probs − onehot(label)`.
pub fn softmax_xent_backward(probs: &Tensor, label: usize) -> Result<Tensor> {
    if label >= probs.len() {
        return Err(Error::param(format!("label {label} out of range for {} classes", probs.len())));
    }
    let mut g = probs.clone();
    g.data_mut()[label] -= 1.0;
    Ok(g)
}
