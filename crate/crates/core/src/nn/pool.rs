use super::cache::{check_upstream, LayerCache, LayerGrads};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn out_extent(n: usize, k: usize, stride: usize) -> usize {
    (n - k) / stride + 1
}

/// Max pooling with a square `k×k` window, floor sizing and no padding.
/// Ties resolve to the smallest flat input index.
pub fn maxpool_forward(input: &Tensor, k: usize, stride: usize) -> Result<(Tensor, LayerCache)> {
    let [n, c, h, w] = input.dims4()?;
    if k == 0 || stride == 0 {
        return Err(Error::invalid("pool window and stride must be positive"));
    }
    if k > h || k > w {
        return Err(Error::dim(format!("pool window {k} larger than input {h}×{w}")));
    }
    let (oh, ow) = (out_extent(h, k, stride), out_extent(w, k, stride));
    let x = input.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * stride * w + ox * stride;
                for dy in 0..k {
                    let row = base + (oy * stride + dy) * w + ox * stride;
                    for idx in row..row + k {
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::new(vec![n, c, oh, ow], out)?,
        LayerCache::MaxPool2d {
            input_shape: [n, c, h, w],
            output_shape: [n, c, oh, ow],
            argmax,
        },
    ))
}

/// Re-evaluate a pooling layer with the argmax positions of an earlier pass.
pub fn maxpool_forward_frozen(input: &Tensor, cache: &LayerCache) -> Result<Tensor> {
    let LayerCache::MaxPool2d {
        input_shape,
        output_shape,
        argmax,
    } = cache
    else {
        return Err(Error::CacheMismatch {
            expected: "maxpool2d",
            found: cache.kind().name(),
        });
    };
    if input.shape() != input_shape {
        return Err(Error::dim("frozen maxpool input shape changed"));
    }
    let data = argmax.iter().map(|&i| input.data()[i]).collect();
    Tensor::new(output_shape.to_vec(), data)
}

pub(crate) fn backward(
    input_shape: [usize; 4],
    output_shape: [usize; 4],
    argmax: &[usize],
    upstream: &Tensor,
) -> Result<LayerGrads> {
    check_upstream(upstream, &output_shape, "maxpool")?;
    let mut grad = Tensor::zeros(input_shape.to_vec());
    let g = grad.data_mut();
    for (&idx, &u) in argmax.iter().zip(upstream.data()) {
        g[idx] += u;
    }
    Ok(LayerGrads {
        input: grad,
        params: vec![],
    })
}
