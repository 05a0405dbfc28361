//! Probability averaging across member networks and the drowsy threshold rule.

use std::path::PathBuf;

use crate::data::{DatasetManifest, Label};
use crate::error::{Error, Result};
use crate::metrics::{confusion_matrix_named, ConfusionMatrix};
use crate::models::{load_checkpoint, predict_samples, ConfigFile, ModelParams, ModelSpec};
use crate::tensor::Tensor;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub members: Vec<PathBuf>,
    pub threshold: f64,
}

impl EnsembleConfig {
    pub fn from_config_file(file: &ConfigFile) -> Result<Self> {
        let section = file
            .ensemble
            .as_ref()
            .ok_or_else(|| Error::Config("config has no 'ensemble' section".into()))?;
        let cfg = Self {
            members: section.members.clone(),
            threshold: section.threshold.unwrap_or(DEFAULT_THRESHOLD),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::Config("ensemble needs at least one member".into()));
        }
        check_threshold(self.threshold)
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!("threshold {threshold} outside [0, 1]")));
    }
    Ok(())
}

/// Elementwise mean of row-stochastic `N × K` member outputs.
///
/// Each element is summed in ascending order as offsets from its smallest
/// member value, so the result does not depend on member order and K equal
/// members reproduce their value exactly.
pub fn ensemble_average(member_probs: &[Tensor]) -> Result<Tensor> {
    let first = member_probs
        .first()
        .ok_or_else(|| Error::invalid("ensemble average of zero members"))?;
    first.dims2()?;
    for (m, t) in member_probs.iter().enumerate() {
        if t.shape() != first.shape() {
            return Err(Error::EnsembleMismatch(format!(
                "member {m} output {:?} differs from {:?}",
                t.shape(),
                first.shape()
            )));
        }
        for i in 0..t.rows() {
            let row = t.row(i);
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid(format!(
                    "member {m} row {i} is not a probability distribution (sums to {sum})"
                )));
            }
        }
    }
    let k = member_probs.len() as f64;
    let mut column = Vec::with_capacity(member_probs.len());
    let data = (0..first.len())
        .map(|j| {
            column.clear();
            column.extend(member_probs.iter().map(|t| t.data()[j]));
            column.sort_by(f64::total_cmp);
            let lo = column[0];
            lo + column.iter().map(|v| v - lo).sum::<f64>() / k
        })
        .collect();
    Tensor::new(first.shape().to_vec(), data)
}

/// Drowsy iff the drowsy-class probability strictly exceeds `threshold`.
pub fn classify_threshold(avg_probs: &Tensor, threshold: f64) -> Result<Vec<Label>> {
    check_threshold(threshold)?;
    let [_, k] = avg_probs.dims2()?;
    if k != Label::NUM_CLASSES {
        return Err(Error::dim(format!("expected {} class columns, got {k}", Label::NUM_CLASSES)));
    }
    let d = Label::Drowsy.index();
    Ok((0..avg_probs.rows())
        .map(|i| {
            if avg_probs.row(i)[d] > threshold {
                Label::Drowsy
            } else {
                Label::Alert
            }
        })
        .collect())
}

/// Loaded member networks sharing one input shape and class count.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub names: Vec<String>,
    pub members: Vec<(ModelSpec, ModelParams)>,
    pub threshold: f64,
}

/// Per-member and averaged results over a set of samples.
#[derive(Clone, Debug)]
pub struct EnsembleEvaluation {
    pub member_probs: Vec<Tensor>,
    pub average: Tensor,
    /// Member matrices (thresholded the same way) followed by the ensemble.
    pub matrices: Vec<(String, ConfusionMatrix)>,
}

impl Ensemble {
    pub fn new(names: Vec<String>, members: Vec<(ModelSpec, ModelParams)>, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        let (first, _) = members
            .first()
            .ok_or_else(|| Error::Config("ensemble needs at least one member".into()))?;
        for (name, (spec, _)) in names.iter().zip(&members) {
            if spec.input_shape() != first.input_shape() || spec.num_classes() != first.num_classes() {
                return Err(Error::EnsembleMismatch(format!(
                    "{name} takes {:?} with {} classes, first member takes {:?} with {}",
                    spec.input_shape(),
                    spec.num_classes(),
                    first.input_shape(),
                    first.num_classes()
                )));
            }
        }
        Ok(Self {
            names,
            members,
            threshold,
        })
    }

    pub fn load(config: &EnsembleConfig) -> Result<Self> {
        config.validate()?;
        let members = config
            .members
            .iter()
            .map(|p| load_checkpoint(p))
            .collect::<Result<Vec<_>>>()?;
        let names = config
            .members
            .iter()
            .map(|p| {
                p.file_stem()
                    .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
            })
            .collect();
        Self::new(names, members, config.threshold)
    }

    pub fn evaluate(&self, manifest: &DatasetManifest, indices: &[usize]) -> Result<EnsembleEvaluation> {
        let member_probs = self
            .members
            .iter()
            .map(|(spec, params)| predict_samples(spec, params, manifest, indices))
            .collect::<Result<Vec<_>>>()?;
        let average = ensemble_average(&member_probs)?;
        let truth: Vec<usize> = indices.iter().map(|&i| manifest.samples[i].label.index()).collect();
        let tally = |probs: &Tensor| -> Result<ConfusionMatrix> {
            let predicted: Vec<usize> = classify_threshold(probs, self.threshold)?
                .into_iter()
                .map(Label::index)
                .collect();
            confusion_matrix_named(&truth, &predicted, Label::class_names())
        };
        let mut matrices = self
            .names
            .iter()
            .zip(&member_probs)
            .map(|(n, p)| Ok((n.clone(), tally(p)?)))
            .collect::<Result<Vec<_>>>()?;
        matrices.push(("Ensemble".to_string(), tally(&average)?));
        Ok(EnsembleEvaluation {
            member_probs,
            average,
            matrices,
        })
    }
}
