use super::cache::{check_upstream, LayerCache, LayerGrads};
use crate::error::Result;
use crate::tensor::Tensor;

/// Elementwise `max(x, 0)`.
pub fn relu_forward(input: &Tensor) -> (Tensor, LayerCache) {
    let out = input.map(|v| v.max(0.0));
    (
        out,
        LayerCache::Relu {
            input: input.clone(),
        },
    )
}

/// Derivative is 1 where the input was positive and 0 elsewhere (including 0).
pub(crate) fn backward(input: &Tensor, upstream: &Tensor) -> Result<LayerGrads> {
    check_upstream(upstream, input.shape(), "relu")?;
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Ok(LayerGrads {
        input: Tensor::new(input.shape().to_vec(), data)?,
        params: vec![],
    })
}
