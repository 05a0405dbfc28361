use super::linalg::ConvGeometry;
use super::{batchnorm, conv, dense, dropout, pool, relu, Mode};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d,
    Relu,
    MaxPool2d,
    Dense,
    BatchNorm,
    Dropout,
    SoftmaxXent,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv2d => "conv2d",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool2d => "maxpool2d",
            LayerKind::Dense => "dense",
            LayerKind::BatchNorm => "batchnorm",
            LayerKind::Dropout => "dropout",
            LayerKind::SoftmaxXent => "softmax_xent",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConvCache {
    pub geometry: ConvGeometry,
    pub batch: usize,
    /// One im2col matrix per sample.
    pub cols: Vec<Vec<f64>>,
    pub weights: Tensor,
}

#[derive(Clone, Debug)]
pub struct BatchNormCache {
    pub input_shape: Vec<usize>,
    pub mode: Mode,
    pub x_hat: Tensor,
    pub inv_std: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Batch statistics (train mode only), used for the running update.
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

/// Values a forward pass retains for its backward pass.
#[derive(Clone, Debug)]
pub enum LayerCache {
    Conv2d(ConvCache),
    Relu {
        input: Tensor,
    },
    MaxPool2d {
        input_shape: [usize; 4],
        output_shape: [usize; 4],
        /// Flat index into the forward input for every output cell.
        argmax: Vec<usize>,
    },
    Dense {
        input: Tensor,
        weights: Tensor,
    },
    BatchNorm(BatchNormCache),
    Dropout {
        /// `None` in inference mode (identity).
        mask: Option<Vec<f64>>,
    },
    SoftmaxXent {
        probs: Tensor,
        labels: Vec<usize>,
    },
}

impl LayerCache {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerCache::Conv2d(_) => LayerKind::Conv2d,
            LayerCache::Relu { .. } => LayerKind::Relu,
            LayerCache::MaxPool2d { .. } => LayerKind::MaxPool2d,
            LayerCache::Dense { .. } => LayerKind::Dense,
            LayerCache::BatchNorm(_) => LayerKind::BatchNorm,
            LayerCache::Dropout { .. } => LayerKind::Dropout,
            LayerCache::SoftmaxXent { .. } => LayerKind::SoftmaxXent,
        }
    }
}

/// Gradients produced by one layer's backward pass. `params` follows the
/// layer's parameter order (conv/dense: weights, bias; batchnorm: gamma, beta).
#[derive(Clone, Debug)]
pub struct LayerGrads {
    pub input: Tensor,
    pub params: Vec<Tensor>,
}

/// Backward pass for one layer given its forward cache and the gradient of
/// the loss with respect to its output. For `SoftmaxXent` the upstream is the
/// scalar gradient of the final objective with respect to the loss (shape `[1]`).
pub fn layer_backward(kind: LayerKind, cache: &LayerCache, upstream: &Tensor) -> Result<LayerGrads> {
    if cache.kind() != kind {
        return Err(Error::CacheMismatch {
            expected: kind.name(),
            found: cache.kind().name(),
        });
    }
    match cache {
        LayerCache::Conv2d(c) => conv::backward(c, upstream),
        LayerCache::Relu { input } => relu::backward(input, upstream),
        LayerCache::MaxPool2d {
            input_shape,
            output_shape,
            argmax,
        } => pool::backward(*input_shape, *output_shape, argmax, upstream),
        LayerCache::Dense { input, weights } => dense::backward(input, weights, upstream),
        LayerCache::BatchNorm(c) => batchnorm::backward(c, upstream),
        LayerCache::Dropout { mask } => dropout::backward(mask.as_deref(), upstream),
        LayerCache::SoftmaxXent { probs, labels } => {
            let scale = match upstream.data() {
                [s] => *s,
                _ => {
                    return Err(Error::dim(format!(
                        "softmax_xent upstream must be a scalar, got {:?}",
                        upstream.shape()
                    )))
                }
            };
            let n = probs.rows() as f64;
            let k = probs.len() / probs.rows();
            let mut grad = probs.clone();
            for (i, &label) in labels.iter().enumerate() {
                grad.data_mut()[i * k + label] -= 1.0;
            }
            grad.data_mut().iter_mut().for_each(|g| *g *= scale / n);
            Ok(LayerGrads {
                input: grad,
                params: vec![],
            })
        }
    }
}

pub(crate) fn check_upstream(upstream: &Tensor, expected: &[usize], layer: &str) -> Result<()> {
    if upstream.shape() != expected {
        return Err(Error::dim(format!(
            "{layer} upstream shape {:?} differs from forward output {expected:?}",
            upstream.shape()
        )));
    }
    Ok(())
}
