//! Named hyperparameter presets and the JSON run-config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::arch::{Arch, ModelSpec};
use super::train::TrainConfig;
use crate::data::INPUT_SHAPE;
use crate::error::{Error, Result};
use crate::optim::OptimizerKind;

pub const DEFAULT_EVAL_EVERY: usize = 50;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub arch: Arch,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub max_iterations: usize,
}

impl Preset {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            optimizer: self.optimizer,
            batch_size: self.batch_size,
            epochs: self.epochs,
            max_iterations: self.max_iterations,
            seed,
            eval_every: DEFAULT_EVAL_EVERY,
        }
    }
}

pub const PRESETS: [Preset; 5] = [
    Preset {
        name: "section3-cnn1",
        arch: Arch::Cnn1,
        optimizer: OptimizerKind::SgdMomentum {
            learning_rate: 0.001,
            momentum: 0.9,
        },
        batch_size: 32,
        epochs: 4,
        max_iterations: 2416,
    },
    Preset {
        name: "section3-cnn2",
        arch: Arch::Cnn2,
        optimizer: OptimizerKind::Adam {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        },
        batch_size: 32,
        epochs: 4,
        max_iterations: 2416,
    },
    Preset {
        name: "section3-cnn3",
        arch: Arch::Cnn3,
        optimizer: OptimizerKind::SgdMomentum {
            learning_rate: 0.001,
            momentum: 0.9,
        },
        batch_size: 64,
        epochs: 4,
        max_iterations: 2816,
    },
    Preset {
        name: "methodology-cnn1",
        arch: Arch::Cnn1,
        optimizer: OptimizerKind::SgdMomentum {
            learning_rate: 0.001,
            momentum: 0.9,
        },
        batch_size: 32,
        epochs: 4,
        max_iterations: 1200,
    },
    Preset {
        name: "methodology-cnn2",
        arch: Arch::Cnn2,
        optimizer: OptimizerKind::Adam {
            learning_rate: 0.0001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        },
        batch_size: 64,
        epochs: 4,
        max_iterations: 1250,
    },
];

pub fn preset(name: &str) -> Result<Preset> {
    PRESETS.iter().find(|p| p.name == name).copied().ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        Error::Config(format!("unknown preset '{name}' (known: {})", known.join(", ")))
    })
}

/// The `section3-*` preset of an architecture.
pub fn default_preset(arch: Arch) -> Preset {
    PRESETS
        .iter()
        .find(|p| p.arch == arch)
        .copied()
        .expect("every arch has a preset")
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub members: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

/// Run configuration file. Every key is optional and overrides the preset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub arch: Option<Arch>,
    pub preset: Option<String>,
    pub optimizer: Option<String>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub max_iterations: Option<usize>,
    pub seed: Option<u64>,
    pub eval_every: Option<usize>,
    /// Dropout rates in dropout-layer order.
    pub dropout_overrides: Option<Vec<f64>>,
    /// 1 (grayscale, default) or 3.
    pub input_channels: Option<usize>,
    pub ensemble: Option<EnsembleSection>,
}

impl ConfigFile {
    pub fn parse(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse a config file; ensemble member paths are taken relative to it.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(e) = cfg.ensemble.as_mut() {
            for m in &mut e.members {
                if m.is_relative() {
                    *m = base.join(&*m);
                }
            }
        }
        Ok(cfg)
    }
}

fn optimizer_kind(name: &str, learning_rate: f64) -> Result<OptimizerKind> {
    match name.to_ascii_lowercase().as_str() {
        "sgd" | "sgdm" | "sgd_momentum" => Ok(OptimizerKind::sgd_momentum(learning_rate)),
        "adam" => Ok(OptimizerKind::adam(learning_rate)),
        _ => Err(Error::Config(format!("unknown optimizer '{name}' (expected sgd_momentum or adam)"))),
    }
}

/// A fully resolved training run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunPlan {
    pub preset: &'static str,
    pub spec: ModelSpec,
    pub config: TrainConfig,
}

/// Layer precedence: explicit flags, then the config file, then the preset
/// (the `section3-*` preset of the arch unless one is named).
pub fn resolve_run(
    arch_flag: Option<Arch>,
    preset_flag: Option<&str>,
    seed_flag: Option<u64>,
    file: &ConfigFile,
) -> Result<RunPlan> {
    let named = preset_flag.or(file.preset.as_deref()).map(preset).transpose()?;
    let arch = arch_flag
        .or(file.arch)
        .or(named.map(|p| p.arch))
        .ok_or_else(|| Error::Config("no architecture given (use --arch, a config 'arch' or a preset)".into()))?;
    let base = named.unwrap_or_else(|| default_preset(arch));
    if base.arch != arch {
        return Err(Error::Config(format!("preset {} is for {}, not {arch}", base.name, base.arch)));
    }

    let lr = file.learning_rate.unwrap_or(base.optimizer.learning_rate());
    let mut optimizer = match &file.optimizer {
        Some(name) => optimizer_kind(name, lr)?,
        None => base.optimizer,
    };
    match &mut optimizer {
        OptimizerKind::SgdMomentum {
            learning_rate,
            momentum,
        } => {
            *learning_rate = lr;
            if let Some(m) = file.momentum {
                *momentum = m;
            }
            if file.beta1.is_some() || file.beta2.is_some() || file.epsilon.is_some() {
                return Err(Error::Config("beta1/beta2/epsilon apply only to adam".into()));
            }
        }
        OptimizerKind::Adam {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } => {
            *learning_rate = lr;
            *beta1 = file.beta1.unwrap_or(*beta1);
            *beta2 = file.beta2.unwrap_or(*beta2);
            *epsilon = file.epsilon.unwrap_or(*epsilon);
            if file.momentum.is_some() {
                return Err(Error::Config("momentum applies only to sgd_momentum".into()));
            }
        }
    }

    let config = TrainConfig {
        optimizer,
        batch_size: file.batch_size.unwrap_or(base.batch_size),
        epochs: file.epochs.unwrap_or(base.epochs),
        max_iterations: file.max_iterations.unwrap_or(base.max_iterations),
        seed: seed_flag.or(file.seed).unwrap_or(DEFAULT_SEED),
        eval_every: file.eval_every.unwrap_or(DEFAULT_EVAL_EVERY),
    };
    config.validate()?;

    let mut spec = ModelSpec::for_arch(arch, file.input_channels.unwrap_or(INPUT_SHAPE[0]))?;
    if let Some(rates) = &file.dropout_overrides {
        spec = spec.with_dropout_rates(rates)?;
    }
    Ok(RunPlan {
        preset: base.name,
        spec,
        config,
    })
}
