//! Ordered layer stacks: shape-chain validation, parameter layout and the
//! batched forward/backward passes built from the individual layer kernels.

use serde::{Deserialize, Serialize};

use super::batchnorm::{self, BatchNormState};
use super::cache::{layer_backward, LayerCache, LayerKind};
use super::conv::{conv2d_forward, ConvParams};
use super::dense::dense_forward;
use super::dropout::{apply_mask, dropout_forward};
use super::linalg::{ConvGeometry, Padding};
use super::pool::{maxpool_forward, maxpool_forward_frozen};
use super::relu::relu_forward;
use super::Mode;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// Declarative description of one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad_before: usize,
        pad_after: usize,
    },
    Relu,
    #[serde(rename = "maxpool2d")]
    MaxPool2d { kernel: usize, stride: usize },
    #[serde(rename = "batchnorm")]
    BatchNorm {
        channels: usize,
        momentum: f64,
        epsilon: f64,
    },
    Flatten,
    Dense { inputs: usize, units: usize },
    Dropout { rate: f64 },
}

impl LayerSpec {
    /// Stride-1 convolution with size-preserving zero padding.
    pub fn conv_same(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        let pad = Padding::same(kernel);
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            pad_before: pad.before,
            pad_after: pad.after,
        }
    }

    pub fn batchnorm(channels: usize) -> Self {
        LayerSpec::BatchNorm {
            channels,
            momentum: batchnorm::DEFAULT_MOMENTUM,
            epsilon: batchnorm::DEFAULT_EPSILON,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool2d { .. } => "maxpool2d",
            LayerSpec::BatchNorm { .. } => "batchnorm",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Dropout { .. } => "dropout",
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |what: &str| {
            Error::dim(format!("{} layer cannot take input {input:?}: {what}", self.name()))
        };
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                pad_before,
                pad_after,
            } => {
                let [c, h, w] = input[..] else {
                    return Err(mismatch("expected C×H×W"));
                };
                if c != in_channels {
                    return Err(mismatch(&format!("expected {in_channels} channels")));
                }
                let pad = Padding {
                    before: pad_before,
                    after: pad_after,
                };
                let g = ConvGeometry::new(c, h, w, kernel, stride, pad)?;
                Ok(vec![out_channels, g.out_height, g.out_width])
            }
            LayerSpec::MaxPool2d { kernel, stride } => {
                let [c, h, w] = input[..] else {
                    return Err(mismatch("expected C×H×W"));
                };
                if kernel == 0 || stride == 0 || kernel > h || kernel > w {
                    return Err(mismatch("window does not fit"));
                }
                Ok(vec![c, (h - kernel) / stride + 1, (w - kernel) / stride + 1])
            }
            LayerSpec::BatchNorm { channels, .. } => {
                if input.len() != 1 && input.len() != 3 || input[0] != channels {
                    return Err(mismatch(&format!("expected {channels} channels")));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dense { inputs, units } => {
                if input != [inputs] {
                    return Err(mismatch(&format!("expected {inputs} flat features")));
                }
                Ok(vec![units])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(mismatch("dropout rate outside [0, 1)"));
                }
                Ok(input.to_vec())
            }
        }
    }
}

/// One learnable parameter or state buffer of a network.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSlot {
    pub layer: usize,
    pub name: String,
    pub shape: Vec<usize>,
    /// False for batchnorm running statistics.
    pub trainable: bool,
}

/// Result of a forward pass, retaining what backward needs.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub output: Tensor,
    pub mode: Mode,
    pub caches: Vec<Option<LayerCache>>,
    batch: usize,
}

/// Gradients with respect to the input and every parameter slot
/// (`None` for non-trainable buffers).
#[derive(Clone, Debug)]
pub struct Gradients {
    pub input: Tensor,
    pub params: Vec<Option<Tensor>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sequential {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    shapes: Vec<Vec<usize>>,
    slots: Vec<ParamSlot>,
    offsets: Vec<usize>,
}

impl Sequential {
    /// Validate that every layer accepts its predecessor's output.
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Result<Self> {
        let mut shapes = vec![input_shape.clone()];
        for layer in &layers {
            let next = layer.output_shape(shapes.last().expect("non-empty"))?;
            shapes.push(next);
        }
        let mut slots = Vec::new();
        let mut offsets = Vec::with_capacity(layers.len());
        let (mut convs, mut bns, mut denses) = (0, 0, 0);
        for (i, layer) in layers.iter().enumerate() {
            offsets.push(slots.len());
            let mut push = |name: String, shape: Vec<usize>, trainable: bool| {
                slots.push(ParamSlot {
                    layer: i,
                    name,
                    shape,
                    trainable,
                })
            };
            match *layer {
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    ..
                } => {
                    convs += 1;
                    push(
                        format!("conv{convs}.weight"),
                        vec![out_channels, in_channels, kernel, kernel],
                        true,
                    );
                    push(format!("conv{convs}.bias"), vec![out_channels], true);
                }
                LayerSpec::BatchNorm { channels, .. } => {
                    bns += 1;
                    push(format!("bn{bns}.gamma"), vec![channels], true);
                    push(format!("bn{bns}.beta"), vec![channels], true);
                    push(format!("bn{bns}.running_mean"), vec![channels], false);
                    push(format!("bn{bns}.running_var"), vec![channels], false);
                }
                LayerSpec::Dense { inputs, units } => {
                    denses += 1;
                    push(format!("dense{denses}.weight"), vec![inputs, units], true);
                    push(format!("dense{denses}.bias"), vec![units], true);
                }
                _ => {}
            }
        }
        Ok(Self {
            input_shape,
            layers,
            shapes,
            slots,
            offsets,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Per-sample input shape.
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    /// Per-sample shape after each layer (index 0 is the input).
    pub fn shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("non-empty")
    }

    pub fn param_slots(&self) -> &[ParamSlot] {
        &self.slots
    }

    fn check_params(&self, params: &[Tensor]) -> Result<()> {
        if params.len() != self.slots.len() {
            return Err(Error::dim(format!(
                "network has {} parameter slots, got {} tensors",
                self.slots.len(),
                params.len()
            )));
        }
        for (slot, p) in self.slots.iter().zip(params) {
            if p.shape() != slot.shape {
                return Err(Error::dim(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    slot.name,
                    p.shape(),
                    slot.shape
                )));
            }
        }
        Ok(())
    }

    fn check_input(&self, input: &Tensor) -> Result<usize> {
        let shape = input.shape();
        if shape.len() != self.input_shape.len() + 1 || shape[1..] != self.input_shape[..] {
            return Err(Error::dim(format!(
                "input {shape:?} does not match per-sample shape {:?}",
                self.input_shape
            )));
        }
        Ok(shape[0])
    }

    fn batch_shape(&self, layer_output: usize, batch: usize) -> Vec<usize> {
        let mut shape = vec![batch];
        shape.extend_from_slice(&self.shapes[layer_output]);
        shape
    }

    fn bn_state(&self, i: usize, params: &[Tensor]) -> BatchNormState {
        let LayerSpec::BatchNorm {
            momentum, epsilon, ..
        } = self.layers[i]
        else {
            unreachable!("bn_state on non-batchnorm layer");
        };
        let o = self.offsets[i];
        BatchNormState {
            gamma: params[o].clone(),
            beta: params[o + 1].clone(),
            running_mean: params[o + 2].clone(),
            running_var: params[o + 3].clone(),
            momentum,
            epsilon,
        }
    }

    fn run(
        &self,
        params: &[Tensor],
        input: &Tensor,
        mode: Mode,
        rng: &mut SplitMix64,
        frozen: Option<&ForwardPass>,
    ) -> Result<ForwardPass> {
        self.check_params(params)?;
        let batch = self.check_input(input)?;
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let o = self.offsets[i];
            let frozen_cache = frozen.and_then(|f| f.caches[i].as_ref());
            let (y, cache) = match *layer {
                LayerSpec::Conv2d {
                    stride,
                    pad_before,
                    pad_after,
                    ..
                } => {
                    let p = ConvParams::new(
                        params[o].clone(),
                        params[o + 1].clone(),
                        stride,
                        Padding {
                            before: pad_before,
                            after: pad_after,
                        },
                    )?;
                    let (y, c) = conv2d_forward(&x, &p)?;
                    (y, Some(c))
                }
                LayerSpec::Relu => match frozen_cache {
                    Some(c @ LayerCache::Relu { input: reference }) => {
                        let mut y = x;
                        for (v, &r) in y.data_mut().iter_mut().zip(reference.data()) {
                            if r <= 0.0 {
                                *v = 0.0;
                            }
                        }
                        (y, Some(c.clone()))
                    }
                    _ => {
                        let (y, c) = relu_forward(&x);
                        (y, Some(c))
                    }
                },
                LayerSpec::MaxPool2d { kernel, stride } => match frozen_cache {
                    Some(c) => (maxpool_forward_frozen(&x, c)?, Some(c.clone())),
                    None => {
                        let (y, c) = maxpool_forward(&x, kernel, stride)?;
                        (y, Some(c))
                    }
                },
                LayerSpec::BatchNorm { .. } => {
                    let (y, c) = batchnorm::batchnorm_forward(&x, &self.bn_state(i, params), mode)?;
                    (y, Some(c))
                }
                LayerSpec::Flatten => (x.reshape(self.batch_shape(i + 1, batch))?, None),
                LayerSpec::Dense { .. } => {
                    let (y, c) = dense_forward(&x, &params[o], &params[o + 1])?;
                    (y, Some(c))
                }
                LayerSpec::Dropout { rate } => match frozen_cache {
                    Some(c @ LayerCache::Dropout { mask }) => {
                        let y = match mask {
                            Some(m) => apply_mask(&x, m)?,
                            None => x,
                        };
                        (y, Some(c.clone()))
                    }
                    _ => {
                        let (y, c) = dropout_forward(&x, rate, mode, rng)?;
                        (y, Some(c))
                    }
                },
            };
            x = y;
            caches.push(cache);
        }
        Ok(ForwardPass {
            output: x,
            mode,
            caches,
            batch,
        })
    }

    /// Forward pass over an `N × input_shape` batch. Dropout draws from `rng`
    /// in train mode; running statistics are not touched (see
    /// [`Sequential::apply_running_stats`]).
    pub fn forward(&self, params: &[Tensor], input: &Tensor, mode: Mode, rng: &mut SplitMix64) -> Result<ForwardPass> {
        self.run(params, input, mode, rng, None)
    }

    /// Re-run a pass reusing the ReLU activation pattern, pooling argmax
    /// positions and dropout masks recorded in `reference`, so the function
    /// is smooth in params and input.
    pub fn forward_frozen(&self, params: &[Tensor], input: &Tensor, reference: &ForwardPass) -> Result<Tensor> {
        let mut rng = SplitMix64::new(0);
        Ok(self
            .run(params, input, reference.mode, &mut rng, Some(reference))?
            .output)
    }

    pub fn backward(&self, params: &[Tensor], pass: &ForwardPass, grad_output: &Tensor) -> Result<Gradients> {
        self.check_params(params)?;
        let mut grads: Vec<Option<Tensor>> = vec![None; self.slots.len()];
        let mut g = grad_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let o = self.offsets[i];
            let kind = match layer {
                LayerSpec::Flatten => {
                    g = g.reshape(self.batch_shape(i, pass.batch))?;
                    continue;
                }
                LayerSpec::Conv2d { .. } => LayerKind::Conv2d,
                LayerSpec::Relu => LayerKind::Relu,
                LayerSpec::MaxPool2d { .. } => LayerKind::MaxPool2d,
                LayerSpec::BatchNorm { .. } => LayerKind::BatchNorm,
                LayerSpec::Dense { .. } => LayerKind::Dense,
                LayerSpec::Dropout { .. } => LayerKind::Dropout,
            };
            let cache = pass.caches[i]
                .as_ref()
                .ok_or_else(|| Error::invalid(format!("layer {i} has no cache")))?;
            let lg = layer_backward(kind, cache, &g)?;
            for (j, pg) in lg.params.into_iter().enumerate() {
                grads[o + j] = Some(pg);
            }
            g = lg.input;
        }
        Ok(Gradients { input: g, params: grads })
    }

    /// Fold the batch statistics of a train-mode pass into running buffers.
    pub fn apply_running_stats(&self, params: &mut [Tensor], pass: &ForwardPass) -> Result<()> {
        self.check_params(params)?;
        for (i, layer) in self.layers.iter().enumerate() {
            let LayerSpec::BatchNorm { momentum, .. } = *layer else {
                continue;
            };
            let Some(LayerCache::BatchNorm(cache)) = &pass.caches[i] else {
                return Err(Error::invalid(format!("layer {i} has no batchnorm cache")));
            };
            if cache.mode != Mode::Train {
                continue;
            }
            let o = self.offsets[i];
            let (head, tail) = params.split_at_mut(o + 3);
            batchnorm::update_running(head[o + 2].data_mut(), tail[0].data_mut(), cache, momentum);
        }
        Ok(())
    }
}
