//! Python bindings: run experiments from TOML, inspect records, and call the
//! SecDT building blocks and leak metrics on plain lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use splitlab::attacks::AttackKind;
use splitlab::data::{gen_synthetic, SyntheticSpec};
use splitlab::experiment::{run_experiment, ExperimentConfig, RunRecord};
use splitlab::numerics::{Matrix, RngStream};
use splitlab::secdt::{self, NormStandard};
use splitlab::{metrics, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::TrainingAborted { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    Matrix::from_rows(rows).map_err(|e| py_err(e.into()))
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(<[f64]>::to_vec).collect()
}

/// An experiment configuration.
#[pyclass(name = "Experiment", module = "splitlab_py")]
struct PyExperiment {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyExperiment {
    /// Defaults: imbalanced synthetic binary task, no defense, all attacks.
    #[new]
    fn new() -> Self {
        Self {
            inner: ExperimentConfig::default(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = ExperimentConfig::from_toml(text).map_err(py_err)?;
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(py_err)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    /// Trains, evaluates and attacks in memory; writes nothing.
    fn run(&self, py: Python<'_>) -> PyResult<PyRunRecord> {
        let cfg = self.inner.clone();
        let artifacts = py.detach(move || run_experiment(&cfg)).map_err(py_err)?;
        Ok(PyRunRecord {
            inner: artifacts.record,
        })
    }

    fn __repr__(&self) -> String {
        format!("Experiment(seed={})", self.inner.seed)
    }
}

#[pyclass(name = "RunRecord", module = "splitlab_py", frozen)]
struct PyRunRecord {
    inner: RunRecord,
}

#[pymethods]
impl PyRunRecord {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    #[getter]
    fn run_id(&self) -> &str {
        &self.inner.run_id
    }

    #[getter]
    fn accuracy(&self) -> f64 {
        self.inner.utility.accuracy
    }

    #[getter]
    fn auc(&self) -> Option<f64> {
        self.inner.utility.auc
    }

    /// AUC on binary tasks, accuracy otherwise.
    #[getter]
    fn test_utility(&self) -> f64 {
        self.inner.utility.headline()
    }

    #[getter]
    fn dimension(&self) -> Option<usize> {
        self.inner.dimension
    }

    #[getter]
    fn epoch_losses(&self) -> Vec<f64> {
        self.inner.epoch_losses.clone()
    }

    /// Leak metric of an attack (`norm`, `direction`, `spectral`,
    /// `model_completion`); None when it was skipped or not run.
    fn leak(&self, attack: &str) -> PyResult<Option<f64>> {
        let kind: AttackKind = attack.parse().map_err(py_err)?;
        Ok(self.inner.leak(kind))
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("RunRecord(run_id={:?}, test_utility={:.4})", self.inner.run_id, self.inner.utility.headline())
    }
}

/// Class pools over the expanded label space.
#[pyclass(name = "MappingPools", module = "splitlab_py")]
struct PyMappingPools {
    inner: secdt::MappingPools,
}

#[pymethods]
impl PyMappingPools {
    #[new]
    fn new(classes: usize, dimension: usize, seed: u64) -> PyResult<Self> {
        let inner = secdt::build_mapping_pools(classes, dimension, &mut RngStream::new(seed)).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn classes(&self) -> usize {
        self.inner.classes()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn pools(&self) -> Vec<Vec<usize>> {
        self.inner.pools().to_vec()
    }

    fn class_of(&self, code: usize) -> PyResult<usize> {
        if code >= self.inner.dimension() {
            return Err(PyValueError::new_err(format!("code {code} outside [0, {})", self.inner.dimension())));
        }
        Ok(self.inner.class_of(code))
    }

    /// One-hot `K`-wide targets; each sample gets a code from its pool.
    fn transform(&mut self, labels: Vec<usize>, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let m = secdt::transform_labels(&labels, &mut self.inner, &mut RngStream::new(seed)).map_err(py_err)?;
        Ok(rows(&m))
    }

    fn weighted_mapping(&self, p: Vec<f64>) -> PyResult<usize> {
        self.check_width(&p)?;
        Ok(secdt::weighted_mapping(&p, &self.inner))
    }

    fn maximum_mapping(&self, p: Vec<f64>) -> PyResult<usize> {
        self.check_width(&p)?;
        Ok(secdt::maximum_mapping(&p, &self.inner))
    }
}

impl PyMappingPools {
    fn check_width(&self, p: &[f64]) -> PyResult<()> {
        if p.len() != self.inner.dimension() {
            return Err(PyValueError::new_err(format!(
                "prediction has {} entries, pools span {}",
                p.len(),
                self.inner.dimension()
            )));
        }
        Ok(())
    }
}

/// Softmax-normalized Gaussian noise added to a soft label.
#[pyfunction]
fn sgn_noise(target: Vec<f64>, mu: f64, seed: u64) -> PyResult<Vec<f64>> {
    secdt::sgn_noise(&target, mu, &mut RngStream::new(seed)).map_err(py_err)
}

/// Rescales every nonzero row to the chosen norm statistic of the batch
/// (`min`, `mean`, `max` or `off`).
#[pyfunction]
#[pyo3(signature = (grads, standard = "mean"))]
fn normalize_gradients(grads: Vec<Vec<f64>>, standard: &str) -> PyResult<Vec<Vec<f64>>> {
    let standard = match standard {
        "min" => NormStandard::Min,
        "mean" => NormStandard::Mean,
        "max" => NormStandard::Max,
        "off" => NormStandard::Off,
        other => return Err(PyValueError::new_err(format!("unknown norm standard {other:?}"))),
    };
    Ok(rows(&secdt::normalize_gradients(&matrix(&grads)?, standard)))
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, positives: Vec<bool>) -> PyResult<f64> {
    metrics::roc_auc(&scores, &positives).map_err(py_err)
}

/// `max(AUC, 1 - AUC)`.
#[pyfunction]
fn leak_auc(scores: Vec<f64>, positives: Vec<bool>) -> PyResult<f64> {
    metrics::leak_auc(&scores, &positives).map_err(py_err)
}

/// Gaussian-cluster dataset; returns `(features, labels)`.
#[pyfunction]
fn synthetic(
    n: usize,
    d: usize,
    class_weights: Vec<f64>,
    separation: f64,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let spec = SyntheticSpec {
        n,
        d,
        class_weights,
        separation,
    };
    let data = gen_synthetic(&spec, &RngStream::new(seed)).map_err(|e| py_err(e.into()))?;
    Ok((rows(data.features()), data.labels().to_vec()))
}

#[pymodule]
pub fn splitlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyExperiment>()?;
    m.add_class::<PyRunRecord>()?;
    m.add_class::<PyMappingPools>()?;
    m.add_function(wrap_pyfunction!(sgn_noise, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_gradients, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(leak_auc, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic, m)?)?;
    Ok(())
}
