//! Central finite-difference verification of the hand-written backward passes.

use super::loss::softmax_cross_entropy;
use super::sequential::{ForwardPass, Sequential};
use super::Mode;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// Scalar objective placed on top of the network output.
#[derive(Clone, Debug)]
pub enum Objective {
    /// Mean softmax cross-entropy against class indices.
    CrossEntropy(Vec<usize>),
    /// `Σ wᵢ·yᵢ` with fixed weights shaped like the output; used for
    /// fragments that do not end in logits.
    Projection(Tensor),
}

impl Objective {
    /// Projection onto seeded uniform weights in `[-1, 1)`.
    pub fn random_projection(shape: Vec<usize>, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        Objective::Projection(Tensor::from_fn(shape, |_| rng.uniform(-1.0, 1.0)))
    }

    fn value_and_grad(&self, output: &Tensor) -> Result<(f64, Tensor)> {
        match self {
            Objective::CrossEntropy(labels) => {
                let (loss, _, grad) = softmax_cross_entropy(output, labels)?;
                Ok((loss, grad))
            }
            Objective::Projection(w) => {
                if w.shape() != output.shape() {
                    return Err(Error::dim(format!(
                        "projection {:?} does not match output {:?}",
                        w.shape(),
                        output.shape()
                    )));
                }
                let v = w.data().iter().zip(output.data()).map(|(a, b)| a * b).sum();
                Ok((v, w.clone()))
            }
        }
    }
}

/// Which coordinates get perturbed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coverage {
    /// Every parameter and input coordinate.
    All,
    /// At most `per_tensor` seeded coordinates from each tensor (all of them
    /// for smaller tensors).
    Sampled { per_tensor: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Coordinate {
    /// Parameter name, or `"input"`.
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Worst [`relative_error`] over every checked coordinate.
    pub max_rel_error: f64,
    pub worst: Option<Coordinate>,
    /// Worst [`resolved_relative_error`].
    pub max_resolved_rel_error: f64,
    pub worst_resolved: Option<Coordinate>,
    /// Coordinates whose `|analytic − numeric|` is within the resolution.
    pub within_resolution: usize,
    /// Largest resolution bound used.
    pub resolution: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_resolved_rel_error < threshold
    }
}

/// Round-off ulps of the objective tolerated in a central difference.
pub const RESOLUTION_ULPS: f64 = 512.0;

/// Smallest derivative difference a central difference can resolve:
/// `512 · ε_machine · max(|f₊|, |f₋|) / 2ε`.
pub fn fd_resolution(plus: f64, minus: f64, epsilon: f64) -> f64 {
    RESOLUTION_ULPS * f64::EPSILON * plus.abs().max(minus.abs()) / (2.0 * epsilon)
}

/// `|a − n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// [`relative_error`] after discounting the resolution `r` of the central
/// difference: `max(0, |a − n| − r) / max(|a|, |n|, 1e-8)`.
pub fn resolved_relative_error(analytic: f64, numeric: f64, resolution: f64) -> f64 {
    ((analytic - numeric).abs() - resolution).max(0.0) / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn pick(len: usize, coverage: Coverage, rng: &mut SplitMix64) -> Vec<usize> {
    match coverage {
        Coverage::Sampled { per_tensor, .. } if len > per_tensor => {
            let mut seen = std::collections::BTreeSet::new();
            while seen.len() < per_tensor {
                seen.insert(rng.below(len));
            }
            seen.into_iter().collect()
        }
        _ => (0..len).collect(),
    }
}

/// Compare analytic gradients of `objective(net(input))` against central
/// differences `(f(x+ε) − f(x−ε)) / 2ε` for every trainable parameter and the
/// input. Batchnorm runs in train mode; ReLU activation patterns, pooling
/// argmax positions and dropout masks (drawn once from `dropout_seed`) stay
/// frozen.
pub fn gradient_check(
    net: &Sequential,
    params: &[Tensor],
    input: &Tensor,
    objective: &Objective,
    epsilon: f64,
    coverage: Coverage,
    dropout_seed: u64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon {epsilon} outside [1e-7, 1e-3]")));
    }
    let mut rng = SplitMix64::new(dropout_seed);
    let pass = net.forward(params, input, Mode::Train, &mut rng)?;
    let (_, grad_out) = objective.value_and_grad(&pass.output)?;
    let grads = net.backward(params, &pass, &grad_out)?;

    let eval = |params: &[Tensor], input: &Tensor, pass: &ForwardPass| -> Result<f64> {
        let out = net.forward_frozen(params, input, pass)?;
        Ok(objective.value_and_grad(&out)?.0)
    };

    let mut pick_rng = match coverage {
        Coverage::Sampled { seed, .. } => SplitMix64::new(seed),
        Coverage::All => SplitMix64::new(0),
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        max_resolved_rel_error: 0.0,
        worst_resolved: None,
        within_resolution: 0,
        resolution: 0.0,
        checked: 0,
    };
    let mut record = |tensor: &str, index: usize, analytic: f64, plus: f64, minus: f64| -> Result<()> {
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("objective when perturbing {tensor}[{index}]")));
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let rel = relative_error(analytic, numeric);
        let coordinate = || Coordinate {
            tensor: tensor.to_string(),
            index,
            analytic,
            numeric,
            rel_error: rel,
        };
        report.checked += 1;
        if report.worst.is_none() || rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst = Some(coordinate());
        }
        let resolution = fd_resolution(plus, minus, epsilon);
        report.resolution = report.resolution.max(resolution);
        let resolved = resolved_relative_error(analytic, numeric, resolution);
        if resolved == 0.0 {
            report.within_resolution += 1;
        }
        if report.worst_resolved.is_none() || resolved > report.max_resolved_rel_error {
            report.max_resolved_rel_error = resolved;
            report.worst_resolved = Some(Coordinate {
                rel_error: resolved,
                ..coordinate()
            });
        }
        Ok(())
    };

    let mut work = params.to_vec();
    for (s, slot) in net.param_slots().iter().enumerate() {
        let Some(analytic) = grads.params[s].as_ref().filter(|_| slot.trainable) else {
            continue;
        };
        for idx in pick(work[s].len(), coverage, &mut pick_rng) {
            let orig = work[s].data()[idx];
            work[s].data_mut()[idx] = orig + epsilon;
            let plus = eval(&work, input, &pass)?;
            work[s].data_mut()[idx] = orig - epsilon;
            let minus = eval(&work, input, &pass)?;
            work[s].data_mut()[idx] = orig;
            record(&slot.name, idx, analytic.data()[idx], plus, minus)?;
        }
    }

    let mut x = input.clone();
    for idx in pick(x.len(), coverage, &mut pick_rng) {
        let orig = x.data()[idx];
        x.data_mut()[idx] = orig + epsilon;
        let plus = eval(params, &x, &pass)?;
        x.data_mut()[idx] = orig - epsilon;
        let minus = eval(params, &x, &pass)?;
        x.data_mut()[idx] = orig;
        record("input", idx, grads.input.data()[idx], plus, minus)?;
    }
    Ok(report)
}
