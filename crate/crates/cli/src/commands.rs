use std::path::{Path, PathBuf};

use ddnet_core::data::{
    load_manifest, load_pgm, resize_bilinear, split_dataset, DatasetManifest, Label, Split, SplitRatios, Strictness,
};
use ddnet_core::ensemble::{Ensemble, EnsembleConfig};
use ddnet_core::metrics::report;
use ddnet_core::models::{
    argmax_rows, check_arch, evaluate, load_checkpoint, predict_proba, resolve_run, save_checkpoint,
    train_with_progress, ConfigFile, ModelParams,
};
use ddnet_core::nn::Coverage;
use ddnet_core::{Error, Tensor};

use crate::{
    Command, EnsembleArgs, EvalArgs, Failure, GradcheckArgs, PredictArgs, SplitArgs, TrainArgs,
};

type CmdResult = Result<(), Failure>;

pub fn run(command: Command) -> CmdResult {
    match command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::EnsembleEval(a) => ensemble_eval(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Split(a) => split(a),
    }
}

fn manifest(path: &Path, lenient: bool) -> Result<DatasetManifest, Failure> {
    let strictness = if lenient {
        Strictness::Lenient
    } else {
        Strictness::Strict
    };
    let m = load_manifest(path, strictness)?;
    const SHOWN: usize = 20;
    for w in m.warnings.iter().take(SHOWN) {
        eprintln!("warning: {w}");
    }
    if m.warnings.len() > SHOWN {
        eprintln!("warning: {} more not shown", m.warnings.len() - SHOWN);
    }
    Ok(m)
}

fn split_indices(m: &DatasetManifest, split: Split) -> Result<Vec<usize>, Failure> {
    let idx = m.indices(split);
    if idx.is_empty() {
        return Err(Error::EmptySplit(split.as_str()).into());
    }
    Ok(idx)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// `runs/m1.ckpt` → `runs/m1.history.csv`
fn default_history_path(out: &Path) -> PathBuf {
    out.with_file_name(format!("{}.history.csv", stem(out)))
}

fn train(a: TrainArgs) -> CmdResult {
    let file = match &a.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let plan = resolve_run(a.arch, a.preset.as_deref(), a.seed, &file)?;
    let mut m = manifest(&a.manifest, a.lenient)?;
    if !m.has_splits() {
        if m.samples.iter().any(|s| s.split.is_some()) {
            return Err(Error::Manifest("some rows have a split and some do not".into()).into());
        }
        eprintln!(
            "note: manifest has no split column; using a stratified 70/15/15 split with seed {}",
            plan.config.seed
        );
        m = split_dataset(&m, SplitRatios::default(), plan.config.seed, true)?;
    }
    let init = ModelParams::init(&plan.spec, plan.config.seed);
    let (params, history) = train_with_progress(&plan.spec, &init, &m, &plan.config, |e| {
        eprintln!(
            "iteration {} train_loss {:.6} train_acc {:.4} val_acc {:.4}",
            e.iteration, e.train_loss, e.train_acc, e.val_acc
        )
    })?;
    save_checkpoint(&plan.spec, &params, &a.out)?;
    let history_path = a.history.unwrap_or_else(|| default_history_path(&a.out));
    history.write_csv(&history_path)?;
    let last = history.last().expect("training records at least one entry");
    println!(
        "arch={} preset={} iterations={} val_acc={:.6} checkpoint={} history={}",
        plan.spec.arch(),
        plan.preset,
        last.iteration,
        last.val_acc,
        a.out.display(),
        history_path.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> CmdResult {
    let (spec, params) = load_checkpoint(&a.checkpoint)?;
    let m = manifest(&a.manifest, a.lenient)?;
    let idx = split_indices(&m, a.split)?;
    let cm = evaluate(&spec, &params, &m, &idx)?;
    let name = a.name.unwrap_or_else(|| stem(&a.checkpoint));
    print!("{}", report(&[(name, cm)], a.format)?);
    Ok(())
}

fn predict(a: PredictArgs) -> CmdResult {
    let (spec, params) = load_checkpoint(&a.checkpoint)?;
    let [c, h, w]: [usize; 3] = spec
        .input_shape()
        .try_into()
        .map_err(|_| Error::HeaderMismatch("checkpoint input is not C×H×W".into()))?;
    let image = resize_bilinear(&load_pgm(&a.image)?, h, w)?;
    let x = Tensor::new(vec![1, c, h, w], image.pixels().repeat(c))?;
    let probs = predict_proba(&spec, &params, &x)?;
    let label = Label::from_index(argmax_rows(&probs)[0]).expect("two-class output");
    println!("label={label} p_drowsy={:.6}", probs.row(0)[Label::Drowsy.index()]);
    Ok(())
}

fn ensemble_eval(a: EnsembleArgs) -> CmdResult {
    let file = ConfigFile::load(&a.config)?;
    let mut cfg = EnsembleConfig::from_config_file(&file)?;
    if let Some(t) = a.threshold {
        cfg.threshold = t;
    }
    cfg.validate()?;
    let ensemble = Ensemble::load(&cfg)?;
    let m = manifest(&a.manifest, a.lenient)?;
    let idx = split_indices(&m, a.split)?;
    let result = ensemble.evaluate(&m, &idx)?;
    print!("{}", report(&result.matrices, a.format)?);
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> CmdResult {
    if !(a.threshold > 0.0) {
        return Err(Failure::Usage(format!("threshold must be positive, got {}", a.threshold)));
    }
    let coverage = if a.all {
        Coverage::All
    } else if a.samples == 0 {
        return Err(Failure::Usage("--samples must be ≥ 1".into()));
    } else {
        Coverage::Sampled {
            per_tensor: a.samples,
            seed: a.seed,
        }
    };
    let r = check_arch(a.arch, a.seed, a.epsilon, coverage)?;
    let worst = r.worst_resolved.as_ref().expect("at least one coordinate");
    let line = format!(
        "arch={} epsilon={:e} checked={} max_rel_err={:.3e} resolved_max_rel_err={:.3e} within_resolution={} \
         worst={}[{}] analytic={:.6e} numeric={:.6e}",
        a.arch,
        a.epsilon,
        r.checked,
        r.max_rel_error,
        r.max_resolved_rel_error,
        r.within_resolution,
        worst.tensor,
        worst.index,
        worst.analytic,
        worst.numeric
    );
    if r.passes(a.threshold) {
        println!("{line}");
        Ok(())
    } else {
        Err(Failure::Numeric(format!("gradient check above {:e}: {line}", a.threshold)))
    }
}

fn split(a: SplitArgs) -> CmdResult {
    let m = manifest(&a.manifest, a.lenient)?;
    let out = split_dataset(&m, SplitRatios::default(), a.seed, a.stratified)?;
    out.save(&a.out)?;
    for split in Split::ALL {
        println!(
            "{split} total={} Alert={} Drowsy={}",
            out.indices(split).len(),
            out.count(split, Label::Alert),
            out.count(split, Label::Drowsy)
        );
    }
    Ok(())
}
