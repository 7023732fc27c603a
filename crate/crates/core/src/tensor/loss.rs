use super::Tensor;
use crate::error::{Error, Result};

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &Tensor) -> Tensor {
    let max = logits.data().iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut p = logits.map(|v| (v - max).exp());
    let sum: f32 = p.data().iter().sum();
    p.data_mut().iter_mut().for_each(|v| *v /= sum);
    p
}

/// Returns `−log softmax(logits)[target]` and its gradient
/// `softmax(logits) − onehot(target)`.
pub fn softmax_cross_entropy(logits: &Tensor, target_class: usize) -> Result<(f32, Tensor)> {
    logits.expect_rank("softmax_cross_entropy", 1)?;
    if target_class >= logits.len() {
        return Err(Error::Index {
            op: "softmax_cross_entropy",
            index: target_class,
            len: logits.len(),
        });
    }
    let x = logits.data();
    let max = x.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let sum: f32 = x.iter().map(|&v| (v - max).exp()).sum();
    let log_sum = sum.ln();
    let loss = log_sum - (x[target_class] - max);
    let mut grad = logits.map(|v| (v - max).exp() / sum);
    grad.data_mut()[target_class] -= 1.0;
    Ok((loss, grad))
}
