use super::arch::{ModelParams, ModelSpec};
use crate::data::{load_batch, DatasetManifest, Label};
use crate::error::{Error, Result};
use crate::metrics::ConfusionMatrix;
use crate::nn::{softmax, ForwardPass, Mode};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// Samples per chunk when scoring a whole split.
pub const EVAL_CHUNK: usize = 64;

fn check_batch(spec: &ModelSpec, batch: &Tensor) -> Result<()> {
    if batch.shape().len() != 4 || batch.shape()[1..] != *spec.input_shape() {
        return Err(Error::dim(format!(
            "{} expects N×{:?} input, got {:?}",
            spec.arch(),
            spec.input_shape(),
            batch.shape()
        )));
    }
    Ok(())
}

/// Logits (in `pass.output`) plus the caches needed for backward.
pub fn model_forward(
    spec: &ModelSpec,
    params: &ModelParams,
    batch: &Tensor,
    mode: Mode,
    rng: &mut SplitMix64,
) -> Result<ForwardPass> {
    check_batch(spec, batch)?;
    spec.net().forward(params.tensors(), batch, mode, rng)
}

/// Inference-mode class probabilities, `N × num_classes`.
pub fn predict_proba(spec: &ModelSpec, params: &ModelParams, batch: &Tensor) -> Result<Tensor> {
    let mut rng = SplitMix64::new(0);
    let pass = model_forward(spec, params, batch, Mode::Infer, &mut rng)?;
    softmax(&pass.output)
}

/// Row-wise argmax; ties go to the lower class index.
pub fn argmax_rows(scores: &Tensor) -> Vec<usize> {
    (0..scores.rows())
        .map(|i| {
            let row = scores.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Inference probabilities for manifest samples, loaded in chunks and
/// returned in the order of `indices`.
pub fn predict_samples(
    spec: &ModelSpec,
    params: &ModelParams,
    manifest: &DatasetManifest,
    indices: &[usize],
) -> Result<Tensor> {
    if indices.is_empty() {
        return Err(Error::invalid("no samples to score"));
    }
    let shape: [usize; 3] = spec
        .input_shape()
        .try_into()
        .map_err(|_| Error::dim("model input is not C×H×W"))?;
    let k = spec.num_classes();
    let mut probs = Vec::with_capacity(indices.len() * k);
    for chunk in indices.chunks(EVAL_CHUNK) {
        let batch = load_batch(manifest, chunk, shape)?;
        probs.extend(predict_proba(spec, params, &batch.images)?.into_data());
    }
    Tensor::new(vec![indices.len(), k], probs)
}

/// Tally argmax predictions against manifest labels.
pub fn evaluate(
    spec: &ModelSpec,
    params: &ModelParams,
    manifest: &DatasetManifest,
    indices: &[usize],
) -> Result<ConfusionMatrix> {
    let probs = predict_samples(spec, params, manifest, indices)?;
    let truth: Vec<usize> = indices.iter().map(|&i| manifest.samples[i].label.index()).collect();
    confusion_from_scores(&probs, &truth)
}

/// Confusion matrix of row-argmax predictions over the Alert/Drowsy classes.
pub fn confusion_from_scores(scores: &Tensor, truth: &[usize]) -> Result<ConfusionMatrix> {
    let predicted = argmax_rows(scores);
    crate::metrics::confusion_matrix_named(truth, &predicted, Label::class_names())
}
