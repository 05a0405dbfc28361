//! Matrix product and the im2col/col2im rearrangements behind convolution.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-major matrix view over a slice, optionally transposed.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    row_stride: isize,
    col_stride: isize,
}

impl<'a> MatRef<'a> {
    pub(crate) fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self {
            data,
            rows,
            cols,
            row_stride: cols as isize,
            col_stride: 1,
        }
    }

    pub(crate) fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }
}

/// `out = a·b + beta·out` for row-major `out` of shape `a.rows × b.cols`.
pub(crate) fn gemm(a: MatRef<'_>, b: MatRef<'_>, beta: f64, out: &mut [f64]) {
    assert_eq!(a.cols, b.rows, "gemm inner extents");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(out.len(), m * n, "gemm output extent");
    if k == 0 {
        out.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    // SAFETY: the views cover exactly `rows × cols` elements of their slices
    // (checked at construction) and `out` is an exclusive m×n row-major buffer.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.row_stride,
            a.col_stride,
            b.data.as_ptr(),
            b.row_stride,
            b.col_stride,
            beta,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Matrix product of `a: [m×k]` and `b: [k×n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let [m, k] = a.dims2()?;
    let [k2, n] = b.dims2()?;
    if k != k2 {
        return Err(Error::dim(format!(
            "matmul inner extents differ: {:?} × {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = vec![0.0; m * n];
    gemm(MatRef::new(a.data(), m, k), MatRef::new(b.data(), k, n), 0.0, &mut out);
    Tensor::new(vec![m, n], out)
}

/// Zero padding applied on each spatial side; `after` may exceed `before`
/// for size-preserving padding with even kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Padding {
    pub before: usize,
    pub after: usize,
}

impl Padding {
    pub fn symmetric(pad: usize) -> Self {
        Self {
            before: pad,
            after: pad,
        }
    }

    /// Padding that keeps a stride-1 output the same size as its input.
    pub fn same(kernel: usize) -> Self {
        let total = kernel.saturating_sub(1);
        Self {
            before: total / 2,
            after: total - total / 2,
        }
    }

    pub fn total(&self) -> usize {
        self.before + self.after
    }
}

/// Spatial bookkeeping shared by im2col, col2im and the conv kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: Padding,
    pub out_height: usize,
    pub out_width: usize,
}

impl ConvGeometry {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
    ) -> Result<Self> {
        if kernel == 0 || stride == 0 {
            return Err(Error::invalid(format!(
                "kernel ({kernel}) and stride ({stride}) must be positive"
            )));
        }
        let padded_h = height + padding.total();
        let padded_w = width + padding.total();
        if kernel > padded_h || kernel > padded_w {
            return Err(Error::dim(format!(
                "kernel {kernel} larger than padded input {padded_h}×{padded_w}"
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            kernel,
            stride,
            padding,
            out_height: (padded_h - kernel) / stride + 1,
            out_width: (padded_w - kernel) / stride + 1,
        })
    }

    /// Rows of the column matrix: `C·k·k`.
    pub fn patch_len(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    /// Columns of the column matrix: `H_out·W_out`.
    pub fn positions(&self) -> usize {
        self.out_height * self.out_width
    }

    pub fn input_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    /// Input column touched by kernel offset `kx` at output column `ox`, if
    /// it falls inside the unpadded image.
    #[inline]
    fn source(&self, o: usize, k: usize, extent: usize) -> Option<usize> {
        (o * self.stride + k)
            .checked_sub(self.padding.before)
            .filter(|&v| v < extent)
    }
}

/// Gather receptive fields of a single `C×H×W` image into `cols`
/// (`patch_len × positions`, row-major).
pub(crate) fn im2col_into(input: &[f64], g: &ConvGeometry, cols: &mut [f64]) {
    let positions = g.positions();
    debug_assert_eq!(input.len(), g.input_len());
    debug_assert_eq!(cols.len(), g.patch_len() * positions);
    let k = g.kernel;
    for c in 0..g.channels {
        let plane = &input[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * positions..(row + 1) * positions];
                for oy in 0..g.out_height {
                    let line = &mut dst[oy * g.out_width..(oy + 1) * g.out_width];
                    match g.source(oy, ky, g.height) {
                        None => line.fill(0.0),
                        Some(iy) => {
                            let src = &plane[iy * g.width..(iy + 1) * g.width];
                            for (ox, v) in line.iter_mut().enumerate() {
                                *v = g.source(ox, kx, g.width).map_or(0.0, |ix| src[ix]);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col_into`]: scatter-add columns back onto the image.
pub(crate) fn col2im_add(cols: &[f64], g: &ConvGeometry, out: &mut [f64]) {
    let positions = g.positions();
    let k = g.kernel;
    for c in 0..g.channels {
        let plane = &mut out[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * positions..(row + 1) * positions];
                for oy in 0..g.out_height {
                    let Some(iy) = g.source(oy, ky, g.height) else {
                        continue;
                    };
                    let dst = &mut plane[iy * g.width..(iy + 1) * g.width];
                    for ox in 0..g.out_width {
                        if let Some(ix) = g.source(ox, kx, g.width) {
                            dst[ix] += src[oy * g.out_width + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Rearrange a `C×H×W` image into its `(C·k·k) × (H_out·W_out)` column matrix.
pub fn im2col(input: &Tensor, kernel: usize, stride: usize, padding: Padding) -> Result<Tensor> {
    let [c, h, w] = input.dims3()?;
    let g = ConvGeometry::new(c, h, w, kernel, stride, padding)?;
    let mut cols = vec![0.0; g.patch_len() * g.positions()];
    im2col_into(input.data(), &g, &mut cols);
    Tensor::new(vec![g.patch_len(), g.positions()], cols)
}

/// Scatter a column matrix back onto a `C×H×W` image, summing overlaps.
pub fn col2im(
    cols: &Tensor,
    shape: [usize; 3],
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> Result<Tensor> {
    let [c, h, w] = shape;
    let g = ConvGeometry::new(c, h, w, kernel, stride, padding)?;
    if cols.shape() != [g.patch_len(), g.positions()] {
        return Err(Error::dim(format!(
            "column matrix {:?} does not match geometry {}×{}",
            cols.shape(),
            g.patch_len(),
            g.positions()
        )));
    }
    let mut out = vec![0.0; g.input_len()];
    col2im_add(cols.data(), &g, &mut out);
    Tensor::new(vec![c, h, w], out)
}
