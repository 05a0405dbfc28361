use super::cache::{LayerCache, LayerGrads};
use super::Mode;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// Inverted dropout: survivors are scaled by `1/(1-rate)` during training so
/// inference is the identity.
pub fn dropout_forward(
    input: &Tensor,
    rate: f64,
    mode: Mode,
    rng: &mut SplitMix64,
) -> Result<(Tensor, LayerCache)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((input.clone(), LayerCache::Dropout { mask: None }));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..input.len())
        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
        .collect();
    let out = apply_mask(input, &mask)?;
    Ok((out, LayerCache::Dropout { mask: Some(mask) }))
}

pub(crate) fn apply_mask(input: &Tensor, mask: &[f64]) -> Result<Tensor> {
    if mask.len() != input.len() {
        return Err(Error::dim("dropout mask length differs from input"));
    }
    let data = input.data().iter().zip(mask).map(|(x, m)| x * m).collect();
    Tensor::new(input.shape().to_vec(), data)
}

pub(crate) fn backward(mask: Option<&[f64]>, upstream: &Tensor) -> Result<LayerGrads> {
    let input = match mask {
        None => upstream.clone(),
        Some(mask) => apply_mask(upstream, mask)?,
    };
    Ok(LayerGrads { input, params: vec![] })
}
