use super::cache::{check_upstream, BatchNormCache, LayerCache, LayerGrads};
use super::Mode;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_MOMENTUM: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Per-channel affine parameters and running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNormState {
    /// gamma = 1, beta = 0, running mean 0 and variance 1.
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::full(vec![channels], 1.0),
            beta: Tensor::zeros(vec![channels]),
            running_mean: Tensor::zeros(vec![channels]),
            running_var: Tensor::full(vec![channels], 1.0),
            momentum: DEFAULT_MOMENTUM,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn validate(&self) -> Result<()> {
        let c = self.channels();
        for (name, t) in [
            ("beta", &self.beta),
            ("running_mean", &self.running_mean),
            ("running_var", &self.running_var),
        ] {
            if t.shape() != [c] {
                return Err(Error::dim(format!(
                    "batchnorm {name} has shape {:?}, expected [{c}]",
                    t.shape()
                )));
            }
        }
        if self.running_var.data().iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("negative running variance"));
        }
        if !(self.momentum > 0.0 && self.momentum < 1.0) || self.epsilon <= 0.0 {
            return Err(Error::invalid("batchnorm momentum must be in (0,1) and epsilon > 0"));
        }
        Ok(())
    }

    /// Fold the batch statistics of a train-mode pass into the running stats.
    pub fn update_running(&mut self, cache: &LayerCache) -> Result<()> {
        let LayerCache::BatchNorm(c) = cache else {
            return Err(Error::CacheMismatch {
                expected: "batchnorm",
                found: cache.kind().name(),
            });
        };
        if c.mode == Mode::Train {
            update_running(
                self.running_mean.data_mut(),
                self.running_var.data_mut(),
                c,
                self.momentum,
            );
        }
        Ok(())
    }
}

pub(crate) fn update_running(mean: &mut [f64], var: &mut [f64], cache: &BatchNormCache, momentum: f64) {
    for (r, b) in mean.iter_mut().zip(&cache.batch_mean) {
        *r = (1.0 - momentum) * *r + momentum * b;
    }
    for (r, b) in var.iter_mut().zip(&cache.batch_var) {
        *r = (1.0 - momentum) * *r + momentum * b;
    }
}

/// `(channels, spatial)` for an `N×C` or `N×C×H×W` input.
fn layout(shape: &[usize]) -> Result<(usize, usize)> {
    match *shape {
        [_, c] => Ok((c, 1)),
        [_, c, h, w] => Ok((c, h * w)),
        _ => Err(Error::dim(format!("batchnorm expects N×C or N×C×H×W, got {shape:?}"))),
    }
}

/// Visit every element of channel `ch`.
fn channel_values(data: &[f64], ch: usize, c: usize, spatial: usize) -> impl Iterator<Item = usize> + '_ {
    let n = data.len() / (c * spatial);
    (0..n).flat_map(move |s| {
        let base = (s * c + ch) * spatial;
        base..base + spatial
    })
}

pub fn batchnorm_forward(input: &Tensor, state: &BatchNormState, mode: Mode) -> Result<(Tensor, LayerCache)> {
    state.validate()?;
    let (c, spatial) = layout(input.shape())?;
    if c != state.channels() {
        return Err(Error::dim(format!(
            "batchnorm has {} channels, input {:?}",
            state.channels(),
            input.shape()
        )));
    }
    let x = input.data();
    let m = x.len() / c;
    let (mean, var) = match mode {
        Mode::Train => {
            if m < 2 {
                return Err(Error::invalid(format!(
                    "train-mode batchnorm needs ≥ 2 values per channel, got {m}"
                )));
            }
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for ch in 0..c {
                let mu = channel_values(x, ch, c, spatial).map(|i| x[i]).sum::<f64>() / m as f64;
                let v = channel_values(x, ch, c, spatial)
                    .map(|i| (x[i] - mu).powi(2))
                    .sum::<f64>()
                    / m as f64;
                mean[ch] = mu;
                var[ch] = v;
            }
            (mean, var)
        }
        Mode::Infer => (
            state.running_mean.data().to_vec(),
            state.running_var.data().to_vec(),
        ),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + state.epsilon).sqrt()).collect();
    let mut x_hat = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for ch in 0..c {
        let (g, b) = (state.gamma.data()[ch], state.beta.data()[ch]);
        for i in channel_values(x, ch, c, spatial) {
            x_hat[i] = (x[i] - mean[ch]) * inv_std[ch];
            out[i] = g * x_hat[i] + b;
        }
    }
    let shape = input.shape().to_vec();
    let (batch_mean, batch_var) = match mode {
        Mode::Train => (mean, var),
        Mode::Infer => (vec![], vec![]),
    };
    Ok((
        Tensor::new(shape.clone(), out)?,
        LayerCache::BatchNorm(BatchNormCache {
            input_shape: shape.clone(),
            mode,
            x_hat: Tensor::new(shape, x_hat)?,
            inv_std,
            gamma: state.gamma.data().to_vec(),
            batch_mean,
            batch_var,
        }),
    ))
}

pub(crate) fn backward(cache: &BatchNormCache, upstream: &Tensor) -> Result<LayerGrads> {
    check_upstream(upstream, &cache.input_shape, "batchnorm")?;
    let (c, spatial) = layout(&cache.input_shape)?;
    let dy = upstream.data();
    let xh = cache.x_hat.data();
    let m = (dy.len() / c) as f64;
    let mut dx = vec![0.0; dy.len()];
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for ch in 0..c {
        let (mut sum_dy, mut sum_dy_xh) = (0.0, 0.0);
        for i in channel_values(dy, ch, c, spatial) {
            sum_dy += dy[i];
            sum_dy_xh += dy[i] * xh[i];
        }
        dgamma[ch] = sum_dy_xh;
        dbeta[ch] = sum_dy;
        let scale = cache.gamma[ch] * cache.inv_std[ch];
        match cache.mode {
            Mode::Train => {
                for i in channel_values(dy, ch, c, spatial) {
                    dx[i] = scale / m * (m * dy[i] - sum_dy - xh[i] * sum_dy_xh);
                }
            }
            Mode::Infer => {
                for i in channel_values(dy, ch, c, spatial) {
                    dx[i] = scale * dy[i];
                }
            }
        }
    }
    Ok(LayerGrads {
        input: Tensor::new(cache.input_shape.clone(), dx)?,
        params: vec![Tensor::new(vec![c], dgamma)?, Tensor::new(vec![c], dbeta)?],
    })
}
