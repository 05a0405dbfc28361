//! CNN1/CNN2/CNN3 registry, training loop, evaluation and checkpoints.

mod arch;
mod checkpoint;
mod config;
mod forward;
mod gradcheck;
mod train;

pub use arch::{build_model, Arch, ModelParams, ModelSpec};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, MAGIC, VERSION};
pub use config::{
    default_preset, preset, resolve_run, ConfigFile, EnsembleSection, Preset, RunPlan, DEFAULT_EVAL_EVERY,
    DEFAULT_SEED, PRESETS,
};
pub use forward::{
    argmax_rows, confusion_from_scores, evaluate, model_forward, predict_proba, predict_samples, EVAL_CHUNK,
};
pub use train::{train, train_with_progress, HistoryEntry, TrainConfig, TrainHistory};
pub use gradcheck::{check_arch, sampled_coverage, GRADCHECK_SAMPLES_PER_TENSOR};
