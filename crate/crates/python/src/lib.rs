//! Python bindings. Images and probability tables cross the boundary as
//! plain lists; reports come back as JSON, CSV or text strings.

use std::path::PathBuf;

use ddnet_core::data::{
    load_manifest, load_pgm, resize_bilinear, split_dataset, Image, Label, Split, SplitRatios, Strictness,
};
use ddnet_core::ensemble::{self, Ensemble, EnsembleConfig};
use ddnet_core::metrics::{self, report, ConfusionMatrix, ReportFormat};
use ddnet_core::models::{
    self, check_arch, evaluate, load_checkpoint, predict_proba, resolve_run, save_checkpoint, Arch, ConfigFile,
    ModelParams, ModelSpec,
};
use ddnet_core::nn::Coverage;
use ddnet_core::{Error, Tensor};
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        e if e.is_numeric() => PyArithmeticError::new_err(e.to_string()),
        Error::Io(_) | Error::MissingFile { .. } | Error::ImageLoad { .. } => PyOSError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn arch(name: &str) -> PyResult<Arch> {
    name.parse().map_err(to_py)
}

fn strictness(lenient: bool) -> Strictness {
    if lenient {
        Strictness::Lenient
    } else {
        Strictness::Strict
    }
}

fn table(rows: Vec<Vec<f64>>) -> PyResult<Tensor> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    let n = rows.len();
    Tensor::new(vec![n, width], rows.concat()).map_err(to_py)
}

fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    t.data().chunks(t.shape()[1].max(1)).map(<[f64]>::to_vec).collect()
}

/// A network specification with its parameters.
#[pyclass(name = "Model", module = "ddnet")]
struct PyModel {
    spec: ModelSpec,
    params: ModelParams,
}

#[pymethods]
impl PyModel {
    /// Freshly initialised network.
    #[new]
    #[pyo3(signature = (arch_name, seed = 0, input_channels = 1))]
    fn new(arch_name: &str, seed: u64, input_channels: usize) -> PyResult<Self> {
        let spec = ModelSpec::for_arch(arch(arch_name)?, input_channels).map_err(to_py)?;
        let params = ModelParams::init(&spec, seed);
        Ok(Self { spec, params })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (spec, params) = load_checkpoint(&path).map_err(to_py)?;
        Ok(Self { spec, params })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&self.spec, &self.params, &path).map_err(to_py)
    }

    #[getter]
    fn arch(&self) -> &'static str {
        self.spec.arch().as_str()
    }

    #[getter]
    fn input_shape(&self) -> Vec<usize> {
        self.spec.input_shape().to_vec()
    }

    #[getter]
    fn flatten_size(&self) -> usize {
        self.spec.flatten_size()
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.params.num_values()
    }

    fn param_names(&self) -> Vec<String> {
        self.params.names().to_vec()
    }

    /// Class probabilities for flattened `C·H·W` images.
    fn predict_proba(&self, images: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let flat = table(images)?;
        let mut shape = vec![flat.shape()[0]];
        shape.extend_from_slice(self.spec.input_shape());
        let x = flat.reshape(shape).map_err(to_py)?;
        Ok(rows(&predict_proba(&self.spec, &self.params, &x).map_err(to_py)?))
    }

    /// `(label, p_drowsy)` for a PGM file of any size.
    fn predict_image(&self, path: PathBuf) -> PyResult<(String, f64)> {
        let [c, h, w] = <[usize; 3]>::try_from(self.spec.input_shape())
            .map_err(|_| PyValueError::new_err("model input is not C×H×W"))?;
        let image = resize_bilinear(&load_pgm(&path).map_err(to_py)?, h, w).map_err(to_py)?;
        let probs = self.predict_proba(vec![image.pixels().repeat(c)])?;
        let p = &probs[0];
        let label = if p[1] > p[0] { Label::Drowsy } else { Label::Alert };
        Ok((label.name().to_string(), p[Label::Drowsy.index()]))
    }

    /// Metrics report on one manifest split.
    #[pyo3(signature = (manifest, split = "test", format = "json", name = "model", lenient = false))]
    fn evaluate(&self, manifest: PathBuf, split: &str, format: &str, name: &str, lenient: bool) -> PyResult<String> {
        let m = load_manifest(&manifest, strictness(lenient)).map_err(to_py)?;
        let split: Split = split.parse().map_err(to_py)?;
        let idx = m.indices(split);
        if idx.is_empty() {
            return Err(to_py(Error::EmptySplit(split.as_str())));
        }
        let cm = evaluate(&self.spec, &self.params, &m, &idx).map_err(to_py)?;
        render(vec![(name.to_string(), cm)], format)
    }

    fn __repr__(&self) -> String {
        format!("Model(arch={:?}, input_shape={:?})", self.arch(), self.spec.input_shape())
    }
}

fn render(cms: Vec<(String, ConfusionMatrix)>, format: &str) -> PyResult<String> {
    let format: ReportFormat = format.parse().map_err(to_py)?;
    report(&cms, format).map_err(to_py)
}

/// Train per preset and config; returns the model and its history rows
/// `(iteration, train_loss, train_acc, val_acc)`.
#[pyfunction]
#[pyo3(signature = (manifest, arch_name = None, preset = None, seed = None, config = None, lenient = false))]
fn train(
    manifest: PathBuf,
    arch_name: Option<&str>,
    preset: Option<&str>,
    seed: Option<u64>,
    config: Option<PathBuf>,
    lenient: bool,
) -> PyResult<(PyModel, Vec<(usize, f64, f64, f64)>)> {
    let file = match config {
        Some(p) => ConfigFile::load(&p).map_err(to_py)?,
        None => ConfigFile::default(),
    };
    let plan = resolve_run(arch_name.map(arch).transpose()?, preset, seed, &file).map_err(to_py)?;
    let mut m = load_manifest(&manifest, strictness(lenient)).map_err(to_py)?;
    if !m.has_splits() {
        m = split_dataset(&m, SplitRatios::default(), plan.config.seed, true).map_err(to_py)?;
    }
    let init = ModelParams::init(&plan.spec, plan.config.seed);
    let (params, history) = models::train(&plan.spec, &init, &m, &plan.config).map_err(to_py)?;
    let rows = history
        .entries
        .iter()
        .map(|e| (e.iteration, e.train_loss, e.train_acc, e.val_acc))
        .collect();
    Ok((PyModel { spec: plan.spec, params }, rows))
}

/// Element-wise mean of member probability tables.
#[pyfunction]
fn ensemble_average(members: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<Vec<f64>>> {
    let tables = members.into_iter().map(table).collect::<PyResult<Vec<_>>>()?;
    Ok(rows(&ensemble::ensemble_average(&tables).map_err(to_py)?))
}

/// `"Drowsy"` where `p_drowsy > threshold`, else `"Alert"`.
#[pyfunction]
fn classify_threshold(probs: Vec<Vec<f64>>, threshold: f64) -> PyResult<Vec<&'static str>> {
    let labels = ensemble::classify_threshold(&table(probs)?, threshold).map_err(to_py)?;
    Ok(labels.into_iter().map(Label::name).collect())
}

/// Evaluate the ensemble described by a JSON config with an `ensemble` section.
#[pyfunction]
#[pyo3(signature = (config, manifest, split = "test", threshold = None, format = "json", lenient = false))]
fn ensemble_eval(
    config: PathBuf,
    manifest: PathBuf,
    split: &str,
    threshold: Option<f64>,
    format: &str,
    lenient: bool,
) -> PyResult<String> {
    let mut cfg = EnsembleConfig::from_config_file(&ConfigFile::load(&config).map_err(to_py)?).map_err(to_py)?;
    if let Some(t) = threshold {
        cfg.threshold = t;
    }
    cfg.validate().map_err(to_py)?;
    let ensemble = Ensemble::load(&cfg).map_err(to_py)?;
    let m = load_manifest(&manifest, strictness(lenient)).map_err(to_py)?;
    let split: Split = split.parse().map_err(to_py)?;
    let result = ensemble.evaluate(&m, &m.indices(split)).map_err(to_py)?;
    render(result.matrices, format)
}

#[pyfunction]
fn confusion_matrix(truth: Vec<usize>, predicted: Vec<usize>, num_classes: usize) -> PyResult<Vec<Vec<u64>>> {
    let cm = metrics::confusion_matrix(&truth, &predicted, num_classes).map_err(to_py)?;
    Ok(cm.counts().to_vec())
}

/// `(precision, recall, f1)` of one class; zero denominators give 0.
#[pyfunction]
fn class_metrics(counts: Vec<Vec<u64>>, class_index: usize) -> PyResult<(f64, f64, f64)> {
    let names = (0..counts.len()).map(|i| format!("class_{i}")).collect();
    let cm = ConfusionMatrix::from_counts(names, counts).map_err(to_py)?;
    let pr = metrics::precision_recall(&cm, class_index).map_err(to_py)?;
    Ok((pr.precision, pr.recall, metrics::f1(pr.precision, pr.recall)))
}

#[pyfunction]
fn f1(precision: f64, recall: f64) -> f64 {
    metrics::f1(precision, recall)
}

/// `(train, validation, test)` sizes for `n` samples.
#[pyfunction]
fn split_sizes(n: usize) -> (usize, usize, usize) {
    let [a, b, c] = SplitRatios::default().sizes(n);
    (a, b, c)
}

/// Assign splits and write the manifest; returns `(split, alert, drowsy)` counts.
#[pyfunction]
#[pyo3(signature = (manifest, out, seed = 0, stratified = true, lenient = false))]
fn split_manifest(
    manifest: PathBuf,
    out: PathBuf,
    seed: u64,
    stratified: bool,
    lenient: bool,
) -> PyResult<Vec<(&'static str, usize, usize)>> {
    let m = load_manifest(&manifest, strictness(lenient)).map_err(to_py)?;
    let split = split_dataset(&m, SplitRatios::default(), seed, stratified).map_err(to_py)?;
    split.save(&out).map_err(to_py)?;
    Ok(Split::ALL
        .iter()
        .map(|&s| (s.as_str(), split.count(s, Label::Alert), split.count(s, Label::Drowsy)))
        .collect())
}

/// `(height, width, pixels in [0, 1])`.
#[pyfunction]
fn read_pgm(path: PathBuf) -> PyResult<(usize, usize, Vec<f64>)> {
    let image = load_pgm(&path).map_err(to_py)?;
    Ok((image.height(), image.width(), image.pixels().to_vec()))
}

#[pyfunction]
fn resize(pixels: Vec<f64>, height: usize, width: usize, out_height: usize, out_width: usize) -> PyResult<Vec<f64>> {
    let image = Image::new(height, width, pixels).map_err(to_py)?;
    Ok(resize_bilinear(&image, out_height, out_width).map_err(to_py)?.pixels().to_vec())
}

/// Finite-difference check; returns `(resolved_max_rel_err, max_rel_err, checked)`.
#[pyfunction]
#[pyo3(signature = (arch_name, epsilon = 1e-5, seed = 0, samples = models::GRADCHECK_SAMPLES_PER_TENSOR))]
fn gradcheck(arch_name: &str, epsilon: f64, seed: u64, samples: usize) -> PyResult<(f64, f64, usize)> {
    let coverage = Coverage::Sampled { per_tensor: samples, seed };
    let r = check_arch(arch(arch_name)?, seed, epsilon, coverage).map_err(to_py)?;
    Ok((r.max_resolved_rel_error, r.max_rel_error, r.checked))
}

#[pymodule]
fn ddnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_average, m)?)?;
    m.add_function(wrap_pyfunction!(classify_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_eval, m)?)?;
    m.add_function(wrap_pyfunction!(confusion_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(class_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(f1, m)?)?;
    m.add_function(wrap_pyfunction!(split_sizes, m)?)?;
    m.add_function(wrap_pyfunction!(split_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(read_pgm, m)?)?;
    m.add_function(wrap_pyfunction!(resize, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add("ARCHS", Arch::ALL.map(Arch::as_str).to_vec())?;
    Ok(())
}
