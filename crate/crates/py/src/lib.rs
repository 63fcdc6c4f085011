//! Python bindings for the grbb crate.
//!
//! Exposes the main types and operations — datasets, training, evaluation,
//! synthetic data, and the variance lower bound — as a compiled extension
//! module named `grbb_py`. Build with `cargo build -p grbb-py --release` and
//! import the resulting cdylib (see `python/smoke_test.py` for a loader).

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use grbb::boosting::{self, TrainConfig, TrainerKind};
use grbb::dataset;
use grbb::error::Error;
use grbb::eval::{self, EarlyExit, MetricSpec};
use grbb::graph::{Kernel, LaplacianSystem, Metric};
use grbb::model;
use grbb::variance;

fn to_py_err(e: Error) -> PyErr {
    match &e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_kernel(name: &str, bandwidth: Option<f64>) -> PyResult<Kernel> {
    match name {
        "binary" => Ok(Kernel::Binary),
        "heat" => Ok(Kernel::Heat { bandwidth }),
        other => Err(PyValueError::new_err(format!(
            "unknown kernel '{}' (expected binary or heat)",
            other
        ))),
    }
}

fn parse_charging(name: &str) -> PyResult<grbb::trees::ChargingMode> {
    match name {
        "ensemble" => Ok(grbb::trees::ChargingMode::PerEnsemble),
        "tree" => Ok(grbb::trees::ChargingMode::PerTree),
        other => Err(PyValueError::new_err(format!(
            "unknown charging mode '{}' (expected ensemble or tree)",
            other
        ))),
    }
}

/// In-memory dataset with labeled rows first.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: dataset::Dataset,
}

#[pymethods]
impl Dataset {
    /// Load a feature CSV (and optional cost file) from disk.
    #[staticmethod]
    #[pyo3(signature = (path, costs=None))]
    fn load(path: &str, costs: Option<&str>) -> PyResult<Self> {
        let inner = dataset::load_dataset(
            std::path::Path::new(path),
            costs.map(std::path::Path::new),
        )
        .map_err(to_py_err)?;
        Ok(Dataset { inner })
    }

    /// Build a dataset from row-wise features and optional per-row labels
    /// (`None` marks a row unlabeled).
    #[staticmethod]
    #[pyo3(signature = (features, labels, costs=None, query_ids=None))]
    fn from_arrays(
        features: Vec<Vec<f64>>,
        labels: Vec<Option<u8>>,
        costs: Option<Vec<f64>>,
        query_ids: Option<Vec<u64>>,
    ) -> PyResult<Self> {
        let inner =
            dataset::Dataset::new(features, labels, costs, None, query_ids).map_err(to_py_err)?;
        Ok(Dataset { inner })
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn labeled_count(&self) -> usize {
        self.inner.labeled_count()
    }

    #[getter]
    fn unlabeled_count(&self) -> usize {
        self.inner.unlabeled_count()
    }

    #[getter]
    fn num_features(&self) -> usize {
        self.inner.num_features()
    }

    /// Labels of the labeled block (rows 0..labeled_count).
    fn labels(&self) -> Vec<u8> {
        self.inner.labels().to_vec()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.rows() {
            return Err(PyValueError::new_err(format!(
                "row {} out of range ({} rows)",
                i,
                self.inner.rows()
            )));
        }
        Ok(self.inner.row(i).to_vec())
    }

    fn feature_costs(&self) -> Vec<f64> {
        self.inner.feature_costs().to_vec()
    }

    fn query_ids(&self) -> Option<Vec<u64>> {
        self.inner.query_ids().map(|q| q.to_vec())
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    /// Keep only `count` labeled rows (whole queries with `by_query`);
    /// the rest become unlabeled.
    #[pyo3(signature = (count, seed=0, by_query=false))]
    fn subsample_labeled(&self, count: usize, seed: u64, by_query: bool) -> PyResult<Dataset> {
        Ok(Dataset {
            inner: self
                .inner
                .subsample_labeled(count, seed, by_query)
                .map_err(to_py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        dataset::save_dataset(&self.inner, std::path::Path::new(path)).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(rows={}, labeled={}, features={})",
            self.inner.rows(),
            self.inner.labeled_count(),
            self.inner.num_features()
        )
    }
}

/// A trained boosted ensemble plus its training metadata.
#[pyclass]
struct Model {
    ensemble: boosting::Ensemble,
    config: TrainConfig,
    fingerprint: String,
    log: Vec<boosting::IterationRecord>,
    warnings: Vec<String>,
}

#[pymethods]
impl Model {
    #[getter]
    fn num_trees(&self) -> usize {
        self.ensemble.num_trees()
    }

    #[getter]
    fn trainer(&self) -> &'static str {
        self.ensemble.trainer().name()
    }

    #[getter]
    fn learning_rate(&self) -> f64 {
        self.ensemble.learning_rate()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.warnings.clone()
    }

    /// Raw additive score of one input.
    #[pyo3(signature = (x, tree_limit=None))]
    fn predict(&self, x: Vec<f64>, tree_limit: Option<usize>) -> PyResult<f64> {
        self.ensemble.score(&x, tree_limit).map_err(to_py_err)
    }

    /// `σ(score)` — the positive-class probability.
    #[pyo3(signature = (x, tree_limit=None))]
    fn predict_proba(&self, x: Vec<f64>, tree_limit: Option<usize>) -> PyResult<f64> {
        Ok(boosting::sigmoid(
            self.ensemble.score(&x, tree_limit).map_err(to_py_err)?,
        ))
    }

    /// Raw scores for every row of a dataset.
    #[pyo3(signature = (data, tree_limit=None))]
    fn predict_dataset(&self, data: &Dataset, tree_limit: Option<usize>) -> PyResult<Vec<f64>> {
        (0..data.inner.rows())
            .map(|i| {
                self.ensemble
                    .score(data.inner.row(i), tree_limit)
                    .map_err(to_py_err)
            })
            .collect()
    }

    /// Per-iteration training log as
    /// `(iteration, train_loss, smoothness_penalty, features_purchased)`.
    fn iteration_log(&self) -> Vec<(usize, f64, f64, usize)> {
        self.log
            .iter()
            .map(|r| (r.iteration, r.train_loss, r.smoothness_penalty, r.features_purchased))
            .collect()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        model::save_model(
            std::path::Path::new(path),
            &self.ensemble,
            &self.config,
            &self.fingerprint,
        )
        .map_err(to_py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Model> {
        let loaded = model::load_model(std::path::Path::new(path)).map_err(to_py_err)?;
        Ok(Model {
            ensemble: loaded.ensemble,
            config: loaded.config,
            fingerprint: loaded.data_fingerprint,
            log: Vec::new(),
            warnings: Vec::new(),
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(trainer={}, trees={}, lr={})",
            self.ensemble.trainer().name(),
            self.ensemble.num_trees(),
            self.ensemble.learning_rate()
        )
    }
}

/// Train a model. `trainer` is one of `gbrt`, `lapgbrt`, `grbb`.
#[pyfunction]
#[pyo3(signature = (data, trainer="grbb", trees=200, lr=0.1, depth=4, mu=0.0,
                    lambda_=0.01, k=9, kernel="binary", bandwidth=None,
                    ridge=1e-8, charging="ensemble", seed=0))]
#[allow(clippy::too_many_arguments)]
fn train(
    data: &Dataset,
    trainer: &str,
    trees: usize,
    lr: f64,
    depth: usize,
    mu: f64,
    lambda_: f64,
    k: usize,
    kernel: &str,
    bandwidth: Option<f64>,
    ridge: f64,
    charging: &str,
    seed: u64,
) -> PyResult<Model> {
    let kind: TrainerKind = trainer.parse().map_err(to_py_err)?;
    let cfg = TrainConfig {
        learning_rate: lr,
        num_trees: trees,
        max_depth: depth,
        cost_weight: mu,
        laplacian_weight: lambda_,
        neighbor_count: k,
        kernel: parse_kernel(kernel, bandwidth)?,
        ridge,
        charging: parse_charging(charging)?,
        seed,
    };
    let outcome = boosting::train(&data.inner, &cfg, kind).map_err(to_py_err)?;
    Ok(Model {
        ensemble: outcome.ensemble,
        config: cfg,
        fingerprint: data.inner.fingerprint(),
        log: outcome.log,
        warnings: outcome.warnings,
    })
}

/// Evaluate a model on fully labeled data; returns a dict with the metric
/// value and the cost report.
#[pyfunction]
#[pyo3(signature = (model, data, metric="accuracy", tree_limit=None,
                    early_exit_interval=None, early_exit_threshold=0.95,
                    drop_low_ranked=false, exit_keep=10, unit_cost=0.0))]
#[allow(clippy::too_many_arguments)]
fn evaluate(
    py: Python<'_>,
    model: &Model,
    data: &Dataset,
    metric: &str,
    tree_limit: Option<usize>,
    early_exit_interval: Option<usize>,
    early_exit_threshold: f64,
    drop_low_ranked: bool,
    exit_keep: usize,
    unit_cost: f64,
) -> PyResult<Py<PyAny>> {
    let metric: MetricSpec = metric.parse().map_err(to_py_err)?;
    let policy = early_exit_interval.map(|interval| {
        if drop_low_ranked {
            EarlyExit::drop_low_ranked(interval, exit_keep)
        } else {
            EarlyExit::confident_positive(interval, early_exit_threshold)
        }
    });
    let result = eval::evaluate(
        &model.ensemble,
        &data.inner,
        metric,
        tree_limit,
        policy,
        unit_cost,
    )
    .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("metric", &result.metric)?;
    out.set_item("value", result.metric_value)?;
    out.set_item("mean_feature_cost", result.cost.mean_feature_cost())?;
    out.set_item("mean_trees", result.cost.mean_trees())?;
    out.set_item("mean_total_cost", result.cost.mean_total_cost)?;
    out.set_item("per_input_feature_cost", result.cost.per_input_feature_cost)?;
    out.set_item("per_input_trees", result.cost.per_input_trees)?;
    out.set_item("scores", result.scores)?;
    Ok(out.into_any().unbind())
}

/// Generate a synthetic manifold; returns `(data, truth)` datasets with
/// identical rows.
#[pyfunction]
#[pyo3(signature = (shape="two-moons", per_class=200, noise=0.1,
                    labeled_per_class=1, seed=0))]
fn synth(
    shape: &str,
    per_class: usize,
    noise: f64,
    labeled_per_class: usize,
    seed: u64,
) -> PyResult<(Dataset, Dataset)> {
    let cfg = grbb::synth::SynthConfig {
        shape: shape.parse().map_err(to_py_err)?,
        points_per_class: per_class,
        noise,
        labeled_per_class,
        seed,
    };
    let out = grbb::synth::generate(&cfg).map_err(to_py_err)?;
    Ok((Dataset { inner: out.data }, Dataset { inner: out.truth }))
}

/// Fisher-information lower bound on prediction variance for a model's
/// scores over a dataset; returns a dict.
#[pyfunction]
#[pyo3(signature = (model, data, lambda_=0.01, k=9, kernel="binary",
                    bandwidth=None, hessian="paper"))]
#[allow(clippy::too_many_arguments)]
fn variance_bound(
    py: Python<'_>,
    model: &Model,
    data: &Dataset,
    lambda_: f64,
    k: usize,
    kernel: &str,
    bandwidth: Option<f64>,
    hessian: &str,
) -> PyResult<Py<PyAny>> {
    let mode: variance::HessianMode = hessian.parse().map_err(to_py_err)?;
    let scores: Vec<f64> = (0..data.inner.rows())
        .map(|i| model.ensemble.score(data.inner.row(i), None))
        .collect::<Result<_, _>>()
        .map_err(to_py_err)?;
    let sys = LaplacianSystem::build(
        &data.inner,
        k,
        parse_kernel(kernel, bandwidth)?,
        Metric::Euclidean,
    )
    .map_err(to_py_err)?;
    let report =
        variance::variance_lower_bound(&scores, &sys, lambda_, mode).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("avg_link_variance", report.avg_link_variance)?;
    out.set_item("per_input_variance", report.per_input_variance)?;
    out.set_item("labeled_count", report.labeled_count)?;
    out.set_item("unlabeled_count", report.unlabeled_count)?;
    out.set_item("applied_ridge", report.applied_ridge)?;
    out.set_item("hessian", report.hessian_mode.name())?;
    Ok(out.into_any().unbind())
}

/// Mean over queries of relevant documents in the top `k` by score.
#[pyfunction]
#[pyo3(signature = (scores, labels, query_ids=None, k=5))]
fn precision_at_k(
    scores: Vec<f64>,
    labels: Vec<u8>,
    query_ids: Option<Vec<u64>>,
    k: usize,
) -> PyResult<f64> {
    eval::precision_at_k(&scores, &labels, query_ids.as_deref(), k).map_err(to_py_err)
}

/// The canonical 11-point cost-weight grid used by sweeps.
#[pyfunction]
fn default_cost_weight_grid() -> Vec<f64> {
    eval::default_cost_weight_grid()
}

#[pymodule]
fn grbb_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(variance_bound, m)?)?;
    m.add_function(wrap_pyfunction!(precision_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(default_cost_weight_grid, m)?)?;
    Ok(())
}
