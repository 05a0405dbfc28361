use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::{ModelParams, ModelSpec};
use super::forward::{argmax_rows, evaluate, model_forward};
use crate::data::{make_batches, DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::metrics::accuracy;
use crate::nn::{softmax_cross_entropy, Mode};
use crate::optim::{OptimizerKind, OptimizerState};
use crate::rng::SplitMix64;

/// Key of the dropout stream derived from the run seed.
const DROPOUT_STREAM: u64 = 0xD50F_0D50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub eval_every: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("max_iterations", self.max_iterations),
            ("eval_every", self.eval_every),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be ≥ 1")));
            }
        }
        Ok(())
    }

    /// Optimizer steps the run will take on `train_samples` samples.
    pub fn total_iterations(&self, train_samples: usize) -> usize {
        let per_epoch = train_samples.div_ceil(self.batch_size);
        (self.epochs * per_epoch).min(self.max_iterations)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    /// Mean mini-batch loss since the previous entry.
    pub train_loss: f64,
    /// Train-mode mini-batch accuracy since the previous entry.
    pub train_acc: f64,
    /// Inference accuracy on the full validation split.
    pub val_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub entries: Vec<HistoryEntry>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&HistoryEntry> {
        self.entries.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,train_loss,train_acc,val_acc\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{}\n", e.iteration, e.train_loss, e.train_acc, e.val_acc));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Mini-batch training; see [`train_with_progress`].
pub fn train(
    spec: &ModelSpec,
    params: &ModelParams,
    manifest: &DatasetManifest,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainHistory)> {
    train_with_progress(spec, params, manifest, config, |_| {})
}

/// Run `min(epochs · steps_per_epoch, max_iterations)` optimizer steps over
/// seeded per-epoch shuffles of the train split, recording a history entry
/// every `eval_every` steps and after the last one. `progress` sees each
/// entry as it is recorded.
pub fn train_with_progress(
    spec: &ModelSpec,
    params: &ModelParams,
    manifest: &DatasetManifest,
    config: &TrainConfig,
    mut progress: impl FnMut(&HistoryEntry),
) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    let train_n = manifest.indices(Split::Train).len();
    if train_n == 0 {
        return Err(Error::EmptySplit(Split::Train.as_str()));
    }
    let val = manifest.indices(Split::Validation);
    if val.is_empty() {
        return Err(Error::EmptySplit(Split::Validation.as_str()));
    }
    let shape: [usize; 3] = spec
        .input_shape()
        .try_into()
        .map_err(|_| Error::dim("model input is not C×H×W"))?;
    let total = config.total_iterations(train_n);

    let mut params = params.clone();
    let mut opt = OptimizerState::new(config.optimizer, params.tensors())?
        .with_names(params.names().iter().cloned());
    let mut dropout_rng = SplitMix64::keyed(config.seed, DROPOUT_STREAM);
    let mut history = TrainHistory::default();
    let (mut loss_sum, mut steps, mut correct, mut seen) = (0.0, 0usize, 0usize, 0usize);
    let mut iteration = 0;

    'epochs: for epoch in 0.. {
        for batch in make_batches(manifest, Split::Train, config.batch_size, config.seed, epoch)?.with_shape(shape) {
            let batch = batch?;
            iteration += 1;
            let diverged = |e: Error| match e {
                Error::NonFinite(_) => Error::NonFiniteLoss { iteration },
                e => e,
            };
            let pass = model_forward(spec, &params, &batch.images, Mode::Train, &mut dropout_rng).map_err(diverged)?;
            let (loss, probs, grad) = softmax_cross_entropy(&pass.output, &batch.labels).map_err(diverged)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { iteration });
            }
            let grads = spec.net().backward(params.tensors(), &pass, &grad)?;
            opt.step(params.tensors_mut(), &grads.params)?;
            spec.net().apply_running_stats(params.tensors_mut(), &pass)?;

            loss_sum += loss;
            steps += 1;
            correct += argmax_rows(&probs)
                .iter()
                .zip(&batch.labels)
                .filter(|(p, t)| p == t)
                .count();
            seen += batch.labels.len();

            if iteration % config.eval_every == 0 || iteration == total {
                let entry = HistoryEntry {
                    iteration,
                    train_loss: loss_sum / steps as f64,
                    train_acc: correct as f64 / seen as f64,
                    val_acc: accuracy(&evaluate(spec, &params, manifest, &val)?)?,
                };
                progress(&entry);
                history.entries.push(entry);
                (loss_sum, steps, correct, seen) = (0.0, 0, 0, 0);
            }
            if iteration == total {
                break 'epochs;
            }
        }
    }
    Ok((params, history))
}
