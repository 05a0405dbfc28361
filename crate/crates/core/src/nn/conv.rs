use super::cache::{check_upstream, ConvCache, LayerCache, LayerGrads};
use super::linalg::{col2im_add, gemm, im2col_into, ConvGeometry, MatRef, Padding};
use crate::error::{Error, Result};
use crate::parallel;
use crate::tensor::Tensor;

/// Filter bank of a 2-D convolution layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    /// `[out_channels, in_channels, k, k]`
    pub weights: Tensor,
    /// `[out_channels]`
    pub bias: Tensor,
    pub stride: usize,
    pub padding: Padding,
}

impl ConvParams {
    pub fn new(weights: Tensor, bias: Tensor, stride: usize, padding: Padding) -> Result<Self> {
        let [o, _, kh, kw] = weights.dims4()?;
        if kh != kw {
            return Err(Error::dim(format!("kernel must be square, got {kh}×{kw}")));
        }
        if bias.shape() != [o] {
            return Err(Error::dim(format!(
                "bias shape {:?} does not match {o} output channels",
                bias.shape()
            )));
        }
        if stride == 0 {
            return Err(Error::invalid("stride must be ≥ 1"));
        }
        Ok(Self {
            weights,
            bias,
            stride,
            padding,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape()[2]
    }
}

/// Cross-correlation of an `N×C×H×W` batch with the filter bank, computed as
/// one `weights · im2col(x)` product per sample.
pub fn conv2d_forward(input: &Tensor, p: &ConvParams) -> Result<(Tensor, LayerCache)> {
    let [n, c, h, w] = input.dims4()?;
    if c != p.in_channels() {
        return Err(Error::dim(format!(
            "conv input has {c} channels, filters expect {}",
            p.in_channels()
        )));
    }
    p.weights.ensure_finite("conv weights")?;
    p.bias.ensure_finite("conv bias")?;
    let g = ConvGeometry::new(c, h, w, p.kernel(), p.stride, p.padding)?;
    let (o, positions, patch) = (p.out_channels(), g.positions(), g.patch_len());
    let weights = MatRef::new(p.weights.data(), o, patch);

    let per_sample = parallel::map_indexed(n, |s| {
        let mut cols = vec![0.0; patch * positions];
        im2col_into(&input.data()[s * g.input_len()..(s + 1) * g.input_len()], &g, &mut cols);
        let mut out = vec![0.0; o * positions];
        gemm(weights, MatRef::new(&cols, patch, positions), 0.0, &mut out);
        for (row, &b) in out.chunks_exact_mut(positions).zip(p.bias.data()) {
            row.iter_mut().for_each(|v| *v += b);
        }
        (cols, out)
    });

    let mut out = Vec::with_capacity(n * o * positions);
    let mut cols = Vec::with_capacity(n);
    for (c_s, o_s) in per_sample {
        out.extend_from_slice(&o_s);
        cols.push(c_s);
    }
    Ok((
        Tensor::new(vec![n, o, g.out_height, g.out_width], out)?,
        LayerCache::Conv2d(ConvCache {
            geometry: g,
            batch: n,
            cols,
            weights: p.weights.clone(),
        }),
    ))
}

pub(crate) fn backward(cache: &ConvCache, upstream: &Tensor) -> Result<LayerGrads> {
    let g = &cache.geometry;
    let o = cache.weights.shape()[0];
    let (positions, patch) = (g.positions(), g.patch_len());
    check_upstream(upstream, &[cache.batch, o, g.out_height, g.out_width], "conv2d")?;
    let weights = MatRef::new(cache.weights.data(), o, patch);

    let per_sample = parallel::map_indexed(cache.batch, |s| {
        let dy = &upstream.data()[s * o * positions..(s + 1) * o * positions];
        let dy_mat = MatRef::new(dy, o, positions);
        let mut dw = vec![0.0; o * patch];
        gemm(dy_mat, MatRef::new(&cache.cols[s], patch, positions).t(), 0.0, &mut dw);
        let db: Vec<f64> = dy.chunks_exact(positions).map(|r| r.iter().sum()).collect();
        let mut dcols = vec![0.0; patch * positions];
        gemm(weights.t(), dy_mat, 0.0, &mut dcols);
        let mut dx = vec![0.0; g.input_len()];
        col2im_add(&dcols, g, &mut dx);
        (dw, db, dx)
    });

    let mut dw = vec![0.0; o * patch];
    let mut db = vec![0.0; o];
    let mut dx = Vec::with_capacity(cache.batch * g.input_len());
    for (dw_s, db_s, dx_s) in per_sample {
        dw.iter_mut().zip(&dw_s).for_each(|(a, b)| *a += b);
        db.iter_mut().zip(&db_s).for_each(|(a, b)| *a += b);
        dx.extend_from_slice(&dx_s);
    }
    Ok(LayerGrads {
        input: Tensor::new(vec![cache.batch, g.channels, g.height, g.width], dx)?,
        params: vec![
            Tensor::new(cache.weights.shape().to_vec(), dw)?,
            Tensor::new(vec![o], db)?,
        ],
    })
}
