//! SGD with momentum and Adam, applied per coordinate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum {
        learning_rate: f64,
        momentum: f64,
    },
    Adam {
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl OptimizerKind {
    pub fn sgd_momentum(learning_rate: f64) -> Self {
        OptimizerKind::SgdMomentum {
            learning_rate,
            momentum: DEFAULT_MOMENTUM,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        OptimizerKind::Adam {
            learning_rate,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match *self {
            OptimizerKind::SgdMomentum { learning_rate, .. } | OptimizerKind::Adam { learning_rate, .. } => {
                learning_rate
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.learning_rate();
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {lr}")));
        }
        match *self {
            OptimizerKind::SgdMomentum { momentum, .. } => {
                if !(0.0..1.0).contains(&momentum) {
                    return Err(Error::invalid(format!("momentum {momentum} outside [0, 1)")));
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
                ..
            } => {
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
                    return Err(Error::invalid(format!("Adam betas ({beta1}, {beta2}) outside [0, 1)")));
                }
                if epsilon <= 0.0 {
                    return Err(Error::invalid("Adam epsilon must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Per-parameter moment buffers mirroring the parameter shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    kind: OptimizerKind,
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    /// SGD velocity, or Adam first moment.
    first: Vec<Vec<f64>>,
    /// Adam second moment (empty for SGD).
    second: Vec<Vec<f64>>,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, params: &[Tensor]) -> Result<Self> {
        kind.validate()?;
        let zeros = || params.iter().map(|p| vec![0.0; p.len()]).collect::<Vec<_>>();
        Ok(Self {
            kind,
            names: (0..params.len()).map(|i| format!("param #{i}")).collect(),
            shapes: params.iter().map(|p| p.shape().to_vec()).collect(),
            first: zeros(),
            second: match kind {
                OptimizerKind::Adam { .. } => zeros(),
                OptimizerKind::SgdMomentum { .. } => vec![],
            },
            step_count: 0,
        })
    }

    /// Names used in error messages.
    pub fn with_names(mut self, names: impl IntoIterator<Item = String>) -> Self {
        let names: Vec<String> = names.into_iter().collect();
        if names.len() == self.names.len() {
            self.names = names;
        }
        self
    }

    pub fn kind(&self) -> &OptimizerKind {
        &self.kind
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// SGD velocity or Adam first moment of parameter `i`.
    pub fn first_moment(&self, i: usize) -> &[f64] {
        &self.first[i]
    }

    /// Adam second moment of parameter `i`; empty for SGD.
    pub fn second_moment(&self, i: usize) -> &[f64] {
        self.second.get(i).map_or(&[], |v| v)
    }

    fn check(&self, params: &[Tensor], grads: &[Option<Tensor>]) -> Result<()> {
        if params.len() != self.shapes.len() || grads.len() != self.shapes.len() {
            return Err(Error::dim(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.shapes.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != self.shapes[i] {
                return Err(Error::dim(format!("{} changed shape to {:?}", self.names[i], p.shape())));
            }
            if let Some(g) = g {
                if g.shape() != p.shape() {
                    return Err(Error::dim(format!(
                        "gradient of {} has shape {:?}, parameter {:?}",
                        self.names[i],
                        g.shape(),
                        p.shape()
                    )));
                }
                g.ensure_finite(&format!("gradient of {}", self.names[i]))?;
            }
        }
        Ok(())
    }

    /// Apply one update. `None` gradients mark tensors that are not trained.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Option<Tensor>]) -> Result<()> {
        self.check(params, grads)?;
        self.step_count += 1;
        match self.kind {
            OptimizerKind::SgdMomentum {
                learning_rate,
                momentum,
            } => {
                for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.first) {
                    let Some(g) = g else { continue };
                    for ((p, &g), v) in p.data_mut().iter_mut().zip(g.data()).zip(v.iter_mut()) {
                        *v = momentum * *v - learning_rate * g;
                        *p += *v;
                    }
                }
            }
            OptimizerKind::Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
            } => {
                let t = self.step_count as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    let Some(g) = g else { continue };
                    for (((p, &g), m), v) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.iter_mut())
                        .zip(v.iter_mut())
                    {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}

/// `v ← momentum·v − lr·g; p ← p + v`
pub fn sgd_momentum_step(params: &mut [Tensor], grads: &[Option<Tensor>], state: &mut OptimizerState) -> Result<()> {
    if !matches!(state.kind, OptimizerKind::SgdMomentum { .. }) {
        return Err(Error::invalid("sgd_momentum_step on an Adam state"));
    }
    state.step(params, grads)
}

/// Bias-corrected Adam update.
pub fn adam_step(params: &mut [Tensor], grads: &[Option<Tensor>], state: &mut OptimizerState) -> Result<()> {
    if !matches!(state.kind, OptimizerKind::Adam { .. }) {
        return Err(Error::invalid("adam_step on an SGD state"));
    }
    state.step(params, grads)
}
