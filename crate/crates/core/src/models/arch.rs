use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Label, INPUT_SHAPE};
use crate::error::{Error, Result};
use crate::nn::{LayerSpec, ParamSlot, Sequential};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Cnn1,
    Cnn2,
    Cnn3,
}

impl Arch {
    pub const ALL: [Arch; 3] = [Arch::Cnn1, Arch::Cnn2, Arch::Cnn3];

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Cnn1 => "cnn1",
            Arch::Cnn2 => "cnn2",
            Arch::Cnn3 => "cnn3",
        }
    }

    /// `(kernel, out_channels)` of each conv block.
    pub fn conv_blocks(self) -> &'static [(usize, usize)] {
        match self {
            Arch::Cnn1 => &[(3, 16), (3, 32), (3, 64)],
            Arch::Cnn2 => &[(3, 3), (4, 16), (3, 32), (3, 64)],
            Arch::Cnn3 => &[(3, 8), (3, 16), (6, 16), (3, 32), (12, 32)],
        }
    }

    /// `(units, dropout rate)` of each hidden dense layer.
    pub fn hidden_dense(self) -> &'static [(usize, f64)] {
        match self {
            Arch::Cnn1 => &[(192, 0.5), (96, 0.5)],
            Arch::Cnn2 => &[(348, 0.0), (192, 0.0), (96, 0.0)],
            Arch::Cnn3 => &[(796, 0.6), (348, 0.6), (192, 0.0), (96, 0.0)],
        }
    }

    /// Layer list for a `channels × h × w` input.
    pub fn layers(self, input_shape: &[usize]) -> Result<Vec<LayerSpec>> {
        let mut layers = Vec::new();
        let mut shape = input_shape.to_vec();
        fn push(layers: &mut Vec<LayerSpec>, shape: &mut Vec<usize>, l: LayerSpec) -> Result<()> {
            *shape = l.output_shape(shape)?;
            layers.push(l);
            Ok(())
        }
        let mut channels = input_shape[0];
        for &(kernel, out) in self.conv_blocks() {
            push(&mut layers, &mut shape, LayerSpec::conv_same(channels, out, kernel))?;
            push(&mut layers, &mut shape, LayerSpec::Relu)?;
            push(&mut layers, &mut shape, LayerSpec::MaxPool2d { kernel: 3, stride: 2 })?;
            channels = out;
        }
        push(&mut layers, &mut shape, LayerSpec::batchnorm(channels))?;
        push(&mut layers, &mut shape, LayerSpec::Flatten)?;
        let mut inputs = shape[0];
        for &(units, rate) in self.hidden_dense() {
            push(&mut layers, &mut shape, LayerSpec::Dense { inputs, units })?;
            push(&mut layers, &mut shape, LayerSpec::Relu)?;
            if rate > 0.0 {
                push(&mut layers, &mut shape, LayerSpec::Dropout { rate })?;
            }
            inputs = units;
        }
        push(
            &mut layers,
            &mut shape,
            LayerSpec::Dense {
                inputs,
                units: Label::NUM_CLASSES,
            },
        )?;
        Ok(layers)
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnn1" => Ok(Arch::Cnn1),
            "cnn2" => Ok(Arch::Cnn2),
            "cnn3" => Ok(Arch::Cnn3),
            _ => Err(Error::UnknownArch(s.to_string())),
        }
    }
}

/// A validated network description ending in a `num_classes`-unit dense layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    arch: Arch,
    num_classes: usize,
    net: Sequential,
}

impl ModelSpec {
    pub fn new(arch: Arch, input_shape: Vec<usize>, layers: Vec<LayerSpec>, num_classes: usize) -> Result<Self> {
        match layers.last() {
            Some(LayerSpec::Dense { units, .. }) if *units == num_classes => {}
            _ => {
                return Err(Error::dim(format!(
                    "final layer must be dense with {num_classes} units"
                )))
            }
        }
        Ok(Self {
            arch,
            num_classes,
            net: Sequential::new(input_shape, layers)?,
        })
    }

    /// Registry architecture on a `channels × 90 × 90` input.
    pub fn for_arch(arch: Arch, channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("input needs at least one channel"));
        }
        let input = vec![channels, INPUT_SHAPE[1], INPUT_SHAPE[2]];
        let layers = arch.layers(&input)?;
        Self::new(arch, input, layers, Label::NUM_CLASSES)
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_shape(&self) -> &[usize] {
        self.net.input_shape()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        self.net.layers()
    }

    pub fn net(&self) -> &Sequential {
        &self.net
    }

    pub fn param_slots(&self) -> &[ParamSlot] {
        self.net.param_slots()
    }

    /// Width of the flattened conv features.
    pub fn flatten_size(&self) -> usize {
        let i = self
            .layers()
            .iter()
            .position(|l| matches!(l, LayerSpec::Flatten))
            .expect("registry specs flatten");
        self.net.shapes()[i + 1][0]
    }

    pub fn dropout_rates(&self) -> Vec<f64> {
        self.layers()
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Dropout { rate } => Some(*rate),
                _ => None,
            })
            .collect()
    }

    /// Replace dropout rates in layer order.
    pub fn with_dropout_rates(&self, rates: &[f64]) -> Result<Self> {
        let current = self.dropout_rates();
        if rates.len() != current.len() {
            return Err(Error::Config(format!(
                "{} has {} dropout layers, got {} overrides",
                self.arch,
                current.len(),
                rates.len()
            )));
        }
        let mut it = rates.iter();
        let layers = self
            .layers()
            .iter()
            .map(|l| match l {
                LayerSpec::Dropout { .. } => LayerSpec::Dropout {
                    rate: *it.next().expect("counted"),
                },
                other => other.clone(),
            })
            .collect();
        Self::new(self.arch, self.input_shape().to_vec(), layers, self.num_classes)
    }
}

/// Named tensors in the order of [`ModelSpec::param_slots`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ModelParams {
    pub fn new(spec: &ModelSpec, tensors: Vec<Tensor>) -> Result<Self> {
        let slots = spec.param_slots();
        if slots.len() != tensors.len() {
            return Err(Error::dim(format!(
                "{} expects {} parameter tensors, got {}",
                spec.arch(),
                slots.len(),
                tensors.len()
            )));
        }
        for (slot, t) in slots.iter().zip(&tensors) {
            if slot.shape != t.shape() {
                return Err(Error::dim(format!(
                    "{} has shape {:?}, expected {:?}",
                    slot.name,
                    t.shape(),
                    slot.shape
                )));
            }
            t.ensure_finite(&slot.name)?;
        }
        Ok(Self {
            names: slots.iter().map(|s| s.name.clone()).collect(),
            tensors,
        })
    }

    /// He-normal weights (std `sqrt(2 / fan_in)`) drawn in slot order from
    /// `SplitMix64(seed)`; zero biases; batchnorm gamma 1, beta 0, running
    /// mean 0, running variance 1.
    pub fn init(spec: &ModelSpec, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let tensors = spec
            .param_slots()
            .iter()
            .map(|slot| {
                let shape = slot.shape.clone();
                let field = slot.name.rsplit('.').next().unwrap_or("");
                match field {
                    "weight" => {
                        let fan_in: usize = if shape.len() == 4 {
                            shape[1..].iter().product()
                        } else {
                            shape[0]
                        };
                        let std = (2.0 / fan_in as f64).sqrt();
                        Tensor::from_fn(shape, |_| std * rng.normal())
                    }
                    "gamma" | "running_var" => Tensor::full(shape, 1.0),
                    _ => Tensor::zeros(shape),
                }
            })
            .collect();
        Self {
            names: spec.param_slots().iter().map(|s| s.name.clone()).collect(),
            tensors,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn into_tensors(self) -> Vec<Tensor> {
        self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }
}

/// Registry architecture on a 1 × 90 × 90 input with seeded initial weights.
pub fn build_model(arch: Arch, seed: u64) -> Result<(ModelSpec, ModelParams)> {
    let spec = ModelSpec::for_arch(arch, INPUT_SHAPE[0])?;
    let params = ModelParams::init(&spec, seed);
    Ok((spec, params))
}
