//! Tensor kernels for every layer kind the networks use, with hand-derived
//! backward passes.

mod batchnorm;
mod cache;
mod conv;
mod dense;
mod dropout;
pub mod gradcheck;
pub mod linalg;
mod loss;
mod pool;
mod relu;
mod sequential;

use serde::{Deserialize, Serialize};

pub use batchnorm::{batchnorm_forward, BatchNormState};
pub use cache::{layer_backward, BatchNormCache, ConvCache, LayerCache, LayerGrads, LayerKind};
pub use conv::{conv2d_forward, ConvParams};
pub use dense::dense_forward;
pub use dropout::dropout_forward;
pub use gradcheck::{fd_resolution, gradient_check, relative_error, resolved_relative_error, Coverage, GradCheckReport, Objective, RESOLUTION_ULPS};
pub use linalg::{col2im, im2col, matmul, Padding};
pub use loss::{softmax, softmax_cross_entropy};
pub use pool::{maxpool_forward, maxpool_forward_frozen};
pub use relu::relu_forward;
pub use sequential::{ForwardPass, Gradients, LayerSpec, ParamSlot, Sequential};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}

#[cfg(test)]
mod tests;
