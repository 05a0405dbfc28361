use super::cache::LayerCache;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-wise softmax with the row maximum subtracted first.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let [_, k] = logits.dims2()?;
    let mut probs = logits.clone();
    for row in probs.data_mut().chunks_exact_mut(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    Ok(probs)
}

/// Mean cross-entropy of softmax probabilities against class indices.
///
/// Returns `(loss, probs, grad_logits)` where `grad_logits = (probs − onehot)/N`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor, Tensor)> {
    let (loss, probs, cache) = softmax_cross_entropy_cached(logits, labels)?;
    let grad = super::layer_backward(
        super::LayerKind::SoftmaxXent,
        &cache,
        &Tensor::full(vec![1], 1.0),
    )?
    .input;
    Ok((loss, probs, grad))
}

pub(crate) fn softmax_cross_entropy_cached(
    logits: &Tensor,
    labels: &[usize],
) -> Result<(f64, Tensor, LayerCache)> {
    let [n, k] = logits.dims2()?;
    if labels.len() != n {
        return Err(Error::dim(format!("{} labels for {n} logit rows", labels.len())));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::LabelOutOfRange { label, classes: k });
    }
    let probs = softmax(logits)?;
    let mut loss = 0.0;
    for (row, &label) in logits.data().chunks_exact(k).zip(labels) {
        // log-softmax directly, so a saturated probability never hits ln(0)
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[label];
    }
    let loss = loss / n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross-entropy loss".into()));
    }
    let cache = LayerCache::SoftmaxXent {
        probs: probs.clone(),
        labels: labels.to_vec(),
    };
    Ok((loss, probs, cache))
}
