//! Python bindings. Matrices cross the boundary as lists of rows.

use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use spdsl_core::descriptors::{self, FeatureSet, SynthConfig};
use spdsl_core::pairgraph::LabeledDataset;
use spdsl_core::pipeline::{self, GradCheckConfig, TrainConfig};
use spdsl_core::spd::{self, MetricKind, SpdMatrix, Transform};
use spdsl_core::{evalkit, io, matfun, Error};

type Rows = Vec<Vec<f64>>;
type LoadedLists = (Vec<Rows>, Vec<usize>, Vec<String>, Vec<String>);

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    if e.is_numerical() {
        PyArithmeticError::new_err(msg)
    } else if matches!(e, Error::Io { .. }) {
        PyOSError::new_err(msg)
    } else {
        PyValueError::new_err(msg)
    }
}

fn to_matrix(rows: &Rows) -> PyResult<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(PyValueError::new_err("matrix must be non-empty"));
    }
    if let Some(i) = rows.iter().position(|row| row.len() != c) {
        return Err(PyValueError::new_err(format!(
            "row {i} has {} entries, expected {c}",
            rows[i].len()
        )));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn from_matrix(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn to_spd(rows: &Rows) -> PyResult<SpdMatrix> {
    SpdMatrix::new(to_matrix(rows)?).map_err(to_py)
}

fn to_transform(rows: &Rows) -> PyResult<Transform> {
    Transform::new(to_matrix(rows)?).map_err(to_py)
}

fn to_metric(name: &str) -> PyResult<MetricKind> {
    name.parse().map_err(to_py)
}

fn to_dataset(samples: &[Rows], labels: Vec<usize>) -> PyResult<LabeledDataset> {
    let samples = samples.iter().map(to_spd).collect::<PyResult<Vec<_>>>()?;
    LabeledDataset::new(samples, labels).map_err(to_py)
}

fn dataset_lists(data: &LabeledDataset) -> (Vec<Rows>, Vec<usize>) {
    let samples = data.samples().iter().map(|x| from_matrix(x.matrix())).collect();
    (samples, data.labels().to_vec())
}

/// Squared distance between two SPD matrices under `metric` ("aim", "stein" or "lem").
#[pyfunction]
#[pyo3(signature = (x, y, metric = "aim"))]
fn dist2(x: Rows, y: Rows, metric: &str) -> PyResult<f64> {
    spd::dist2(to_metric(metric)?, &to_spd(&x)?, &to_spd(&y)?).map_err(to_py)
}

/// Principal matrix logarithm of an SPD matrix.
#[pyfunction]
fn spd_log(x: Rows) -> PyResult<Rows> {
    matfun::spd_log(&to_matrix(&x)?).map(|m| from_matrix(&m)).map_err(to_py)
}

/// Matrix exponential of a symmetric matrix.
#[pyfunction]
fn spd_exp(h: Rows) -> PyResult<Rows> {
    matfun::spd_exp(&to_matrix(&h)?).map(|m| from_matrix(&m)).map_err(to_py)
}

/// Fréchet derivative of the matrix logarithm at `x` in direction `h`.
#[pyfunction]
fn dlog(x: Rows, h: Rows) -> PyResult<Rows> {
    matfun::dlog(&to_matrix(&x)?, &to_matrix(&h)?)
        .map(|m| from_matrix(&m))
        .map_err(to_py)
}

/// `WᵀXW` for an SPD `x` and a full-rank `n×m` transform `w`.
#[pyfunction]
fn map_down(x: Rows, w: Rows) -> PyResult<Rows> {
    spd::map_down(&to_spd(&x)?, &to_transform(&w)?)
        .map(|y| from_matrix(y.matrix()))
        .map_err(to_py)
}

/// Default kernel bandwidth `1/σ²` with `σ` the mean pairwise distance.
#[pyfunction]
#[pyo3(signature = (samples, metric = "aim"))]
fn auto_beta(samples: Vec<Rows>, metric: &str) -> PyResult<f64> {
    let samples = samples.iter().map(to_spd).collect::<PyResult<Vec<_>>>()?;
    spd::auto_beta(to_metric(metric)?, &samples).map_err(to_py)
}

/// Ridge-regularized covariance descriptor of a feature set (one frame per row).
#[pyfunction]
#[pyo3(signature = (frames, augment_mean = false))]
fn cov_descriptor(frames: Rows, augment_mean: bool) -> PyResult<Rows> {
    let fs = FeatureSet::new(frames).map_err(to_py)?;
    descriptors::cov_descriptor(&fs, augment_mean)
        .map(|x| from_matrix(x.matrix()))
        .map_err(to_py)
}

/// Synthetic labeled SPD dataset; returns `(samples, labels)`.
#[pyfunction]
#[pyo3(signature = (n = 20, classes = 5, per_class = 20, noise = 1.5, seed = 0, informative_dim = None))]
fn synth_dataset(
    py: Python<'_>,
    n: usize,
    classes: usize,
    per_class: usize,
    noise: f64,
    seed: u64,
    informative_dim: Option<usize>,
) -> PyResult<(Vec<Rows>, Vec<usize>)> {
    let cfg = SynthConfig {
        n,
        classes,
        per_class,
        noise,
        seed,
        informative_dim,
    };
    let data = py.detach(|| descriptors::synth_dataset(&cfg)).map_err(to_py)?;
    Ok(dataset_lists(&data))
}

/// Reads a dataset manifest; returns `(samples, labels, class_names, ids)`.
#[pyfunction]
fn load_dataset(path: PathBuf) -> PyResult<LoadedLists> {
    let loaded = io::load_dataset(&path).map_err(to_py)?;
    let (samples, labels) = dataset_lists(&loaded.data);
    Ok((samples, labels, loaded.class_names, loaded.ids))
}

/// Learns an `n×target_dim` transform by maximizing the alignment objective.
///
/// Returns a dict with `transform`, `j_trace`, `grad_norm_trace`, `iterations`,
/// `stop_reason`, `beta`, `vw` and `upper_bound`.
#[pyfunction]
#[pyo3(signature = (samples, labels, target_dim, metric = "aim", vw = None, vb = 1, beta = None, max_iters = 50, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    samples: Vec<Rows>,
    labels: Vec<usize>,
    target_dim: usize,
    metric: &str,
    vw: Option<usize>,
    vb: usize,
    beta: Option<f64>,
    max_iters: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let data = to_dataset(&samples, labels)?;
    let mut cfg = TrainConfig {
        metric: to_metric(metric)?,
        target_dim,
        v_w: vw,
        v_b: vb,
        beta,
        ..Default::default()
    };
    cfg.optimizer.max_iters = max_iters;
    cfg.optimizer.seed = seed;
    let outcome = py.detach(|| pipeline::train(&data, &cfg)).map_err(to_py)?;

    let out = PyDict::new(py);
    out.set_item("transform", from_matrix(outcome.result.transform.matrix()))?;
    out.set_item("j_trace", outcome.result.j_trace())?;
    out.set_item("grad_norm_trace", outcome.result.grad_norm_trace())?;
    out.set_item("iterations", outcome.result.iterations_used)?;
    out.set_item("stop_reason", outcome.result.stop_reason.to_string())?;
    out.set_item("beta", outcome.beta)?;
    out.set_item("vw", outcome.v_w)?;
    out.set_item("upper_bound", outcome.upper_bound)?;
    Ok(out)
}

/// k-NN accuracy on a test set, optionally after mapping both sets through `transform`.
#[pyfunction]
#[pyo3(signature = (train_samples, train_labels, test_samples, test_labels, metric = "aim", transform = None, k = 1))]
#[allow(clippy::too_many_arguments)]
fn knn_accuracy(
    py: Python<'_>,
    train_samples: Vec<Rows>,
    train_labels: Vec<usize>,
    test_samples: Vec<Rows>,
    test_labels: Vec<usize>,
    metric: &str,
    transform: Option<Rows>,
    k: usize,
) -> PyResult<f64> {
    let train = to_dataset(&train_samples, train_labels)?;
    let test = to_dataset(&test_samples, test_labels)?;
    let metric = to_metric(metric)?;
    let w = transform.as_ref().map(to_transform).transpose()?;
    let report = py
        .detach(|| evalkit::knn_classify(&train, &test, metric, w.as_ref(), k))
        .map_err(to_py)?;
    Ok(report.accuracy)
}

/// Relative error between the analytic and finite-difference gradients on a random instance.
#[pyfunction]
#[pyo3(signature = (metric = "aim", seed = 0))]
fn gradient_check(py: Python<'_>, metric: &str, seed: u64) -> PyResult<f64> {
    let metric = to_metric(metric)?;
    let cfg = GradCheckConfig {
        seed,
        ..Default::default()
    };
    let report = py.detach(|| pipeline::gradient_check(metric, &cfg)).map_err(to_py)?;
    Ok(report.relative_error)
}

/// Geometry-aware similarity learning on SPD matrices.
#[pymodule]
fn spdsl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(dist2, m)?)?;
    m.add_function(wrap_pyfunction!(spd_log, m)?)?;
    m.add_function(wrap_pyfunction!(spd_exp, m)?)?;
    m.add_function(wrap_pyfunction!(dlog, m)?)?;
    m.add_function(wrap_pyfunction!(map_down, m)?)?;
    m.add_function(wrap_pyfunction!(auto_beta, m)?)?;
    m.add_function(wrap_pyfunction!(cov_descriptor, m)?)?;
    m.add_function(wrap_pyfunction!(synth_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(knn_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check, m)?)?;
    Ok(())
}
