use super::cache::{check_upstream, LayerCache, LayerGrads};
use super::linalg::{gemm, MatRef};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Fully connected layer: `input [N×F] · weights [F×U] + bias [U]`.
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<(Tensor, LayerCache)> {
    let [n, f] = input.dims2()?;
    let [wf, u] = weights.dims2()?;
    if f != wf {
        return Err(Error::dim(format!(
            "dense layer expects {wf} input features, got {f} (input {:?})",
            input.shape()
        )));
    }
    if bias.shape() != [u] {
        return Err(Error::dim(format!("dense bias {:?} does not match {u} units", bias.shape())));
    }
    let mut out = vec![0.0; n * u];
    gemm(MatRef::new(input.data(), n, f), MatRef::new(weights.data(), f, u), 0.0, &mut out);
    for row in out.chunks_exact_mut(u) {
        row.iter_mut().zip(bias.data()).for_each(|(v, b)| *v += b);
    }
    Ok((
        Tensor::new(vec![n, u], out)?,
        LayerCache::Dense {
            input: input.clone(),
            weights: weights.clone(),
        },
    ))
}

pub(crate) fn backward(input: &Tensor, weights: &Tensor, upstream: &Tensor) -> Result<LayerGrads> {
    let [n, f] = input.dims2()?;
    let [_, u] = weights.dims2()?;
    check_upstream(upstream, &[n, u], "dense")?;
    let dy = MatRef::new(upstream.data(), n, u);
    let mut dx = vec![0.0; n * f];
    gemm(dy, MatRef::new(weights.data(), f, u).t(), 0.0, &mut dx);
    let mut dw = vec![0.0; f * u];
    gemm(MatRef::new(input.data(), n, f).t(), dy, 0.0, &mut dw);
    let mut db = vec![0.0; u];
    for row in upstream.data().chunks_exact(u) {
        db.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    Ok(LayerGrads {
        input: Tensor::new(vec![n, f], dx)?,
        params: vec![Tensor::new(vec![f, u], dw)?, Tensor::new(vec![u], db)?],
    })
}
