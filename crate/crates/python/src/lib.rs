//! Python bindings: datasets, rule models, the four explainers, OOD
//! detectors and scaffolds, and the config-driven experiment runner.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;

use xailab::adversarial::{
    build_scaffold, degrade_detector, fidelity, train_ood_detector, FlipMode, OodDetector,
    OodTrainConfig, DEFAULT_F1_TOLERANCE,
};
use xailab::data::{fit_standardization, generate_synthetic, load_csv, split, Dataset, SyntheticConfig};
use xailab::ensemble::{explain_shlime_basic, ShlimeConfig, SignPolicy};
use xailab::explainers::{
    exact_shapley, explain_kernel_shap, explain_lime, rank_features, AttributionVector, LimeConfig,
    ShapConfig,
};
use xailab::experiments::{run_config, ExperimentConfig};
use xailab::model::{BlackBoxModel, SharedModel};
use xailab::models::{make_biased_rule, make_unbiased_rule};
use xailab::perturb::PerturbMode;

fn err(e: xailab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_mode(mode: &str) -> PyResult<PerturbMode> {
    match mode {
        "lime" => Ok(PerturbMode::Lime),
        "shap" => Ok(PerturbMode::Shap),
        other => Err(PyValueError::new_err(format!("mode must be `lime` or `shap`, got `{other}`"))),
    }
}

#[pyclass(name = "Dataset", module = "pyxailab", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (n_rows, bias=0.9, n_noise=12, n_uncorrelated=1, seed=0))]
    fn synthetic(n_rows: usize, bias: f64, n_noise: usize, n_uncorrelated: usize, seed: u64) -> PyResult<Self> {
        let inner = generate_synthetic(&SyntheticConfig {
            n_rows,
            n_noise_features: n_noise,
            bias_strength: bias,
            n_uncorrelated,
            seed,
            ..SyntheticConfig::default()
        })
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load_csv(path: PathBuf, schema: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_csv(path, schema).map_err(err)?,
        })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_csv(path).map_err(err)
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.schema().feature_names().into_iter().map(String::from).collect()
    }

    #[getter]
    fn sensitive_index(&self) -> usize {
        self.inner.schema().sensitive_index()
    }

    #[getter]
    fn uncorrelated_indices(&self) -> Vec<usize> {
        self.inner.schema().uncorrelated_indices().to_vec()
    }

    #[getter]
    fn labels(&self) -> Vec<u8> {
        self.inner.labels().to_vec()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.n_rows() {
            return Err(PyIndexError::new_err(format!("row {i} out of range")));
        }
        Ok(self.inner.row(i).to_vec())
    }

    /// `(train, test)`.
    #[pyo3(signature = (test_fraction=0.2, seed=0))]
    fn split(&self, test_fraction: f64, seed: u64) -> PyResult<(Self, Self)> {
        let (a, b) = split(&self.inner, test_fraction, seed).map_err(err)?;
        Ok((Self { inner: a }, Self { inner: b }))
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n_rows={}, width={})", self.inner.n_rows(), self.inner.width())
    }
}

#[pyclass(name = "Model", module = "pyxailab", frozen)]
struct PyModel {
    inner: SharedModel,
    kind: String,
}

#[pymethods]
impl PyModel {
    fn predict_proba(&self, row: Vec<f64>) -> (f64, f64) {
        let [p0, p1] = self.inner.predict_proba(&row);
        (p0, p1)
    }

    fn predict(&self, row: Vec<f64>) -> u8 {
        self.inner.predict(&row)
    }

    #[getter]
    fn kind(&self) -> &str {
        &self.kind
    }

    fn __repr__(&self) -> String {
        format!("Model({})", self.kind)
    }
}

#[pyclass(name = "Attribution", module = "pyxailab", frozen)]
struct PyAttribution {
    #[pyo3(get)]
    intercept: f64,
    #[pyo3(get)]
    weights: Vec<f64>,
    #[pyo3(get)]
    tag: String,
}

impl From<AttributionVector> for PyAttribution {
    fn from(a: AttributionVector) -> Self {
        Self {
            intercept: a.intercept,
            weights: a.weights,
            tag: a.tag.as_str().to_string(),
        }
    }
}

#[pymethods]
impl PyAttribution {
    /// Feature indices by decreasing magnitude.
    fn ranking(&self) -> Vec<usize> {
        rank_features(&AttributionVector {
            intercept: self.intercept,
            weights: self.weights.clone(),
            tag: self.tag.parse().unwrap_or(xailab::explainers::ExplainerTag::Lime),
        })
    }

    fn __repr__(&self) -> String {
        format!("Attribution(tag={}, intercept={}, weights={:?})", self.tag, self.intercept, self.weights)
    }
}

#[pyclass(name = "OodDetector", module = "pyxailab", frozen)]
struct PyDetector {
    inner: OodDetector,
}

#[pymethods]
impl PyDetector {
    #[getter]
    fn heldout_f1(&self) -> f64 {
        self.inner.heldout_f1
    }

    #[getter]
    fn measured_f1(&self) -> f64 {
        self.inner.measured_f1
    }

    #[getter]
    fn flip_rate(&self) -> f64 {
        self.inner.flip_rate
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.as_str()
    }

    fn is_ood(&self, row: Vec<f64>) -> bool {
        self.inner.is_ood(&row)
    }

    fn f1_on(&self, eval: &PyDataset) -> PyResult<f64> {
        self.inner.f1_on(&eval.inner).map_err(err)
    }

    /// Copy with decision noise calibrated so its F1 on `eval` hits `target`.
    #[pyo3(signature = (target, eval, tolerance=DEFAULT_F1_TOLERANCE, symmetric=false, seed=0))]
    fn degrade(&self, target: f64, eval: &PyDataset, tolerance: f64, symmetric: bool, seed: u64) -> PyResult<Self> {
        let mode = if symmetric { FlipMode::Symmetric } else { FlipMode::MissOnly };
        let inner = degrade_detector(&self.inner, target, &eval.inner, tolerance, mode, seed).map_err(err)?;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "OodDetector(mode={}, heldout_f1={:.4}, flip_rate={:.4})",
            self.inner.mode.as_str(),
            self.inner.heldout_f1,
            self.inner.flip_rate
        )
    }
}

#[pyfunction]
fn biased_rule(data: &PyDataset) -> PyResult<PyModel> {
    let m = make_biased_rule(data.inner.schema()).map_err(err)?;
    Ok(PyModel {
        inner: Arc::new(m),
        kind: "biased_rule".into(),
    })
}

/// Rule on an uncorrelated feature, the first one when `feature` is omitted.
#[pyfunction]
#[pyo3(signature = (data, feature=None))]
fn unbiased_rule(data: &PyDataset, feature: Option<&str>) -> PyResult<PyModel> {
    let schema = data.inner.schema();
    let index = match feature {
        Some(name) => schema
            .index_of(name)
            .ok_or_else(|| PyValueError::new_err(format!("no feature named `{name}`")))?,
        None => *schema
            .uncorrelated_indices()
            .first()
            .ok_or_else(|| PyValueError::new_err("schema declares no uncorrelated feature"))?,
    };
    let m = make_unbiased_rule(schema, index).map_err(err)?;
    Ok(PyModel {
        inner: Arc::new(m),
        kind: format!("rule:{}", schema.features()[index].name),
    })
}

#[pyfunction]
#[pyo3(name = "explain_lime", signature = (model, data, row, n_samples=5000, seed=0))]
fn py_explain_lime(model: &PyModel, data: &PyDataset, row: Vec<f64>, n_samples: usize, seed: u64) -> PyResult<PyAttribution> {
    let stats = fit_standardization(&data.inner).map_err(err)?;
    let config = LimeConfig {
        n_samples,
        ..LimeConfig::default()
    };
    Ok(explain_lime(model.inner.as_ref(), &row, &stats, &config, seed)
        .map_err(err)?
        .into())
}

#[pyfunction]
#[pyo3(name = "explain_kernel_shap", signature = (model, row, backgrounds, n_coalitions=2048, exact_threshold=12, seed=0))]
fn py_explain_kernel_shap(
    model: &PyModel,
    row: Vec<f64>,
    backgrounds: Vec<Vec<f64>>,
    n_coalitions: usize,
    exact_threshold: usize,
    seed: u64,
) -> PyResult<PyAttribution> {
    let config = ShapConfig {
        n_coalitions,
        exact_threshold,
        backgrounds,
    };
    Ok(explain_kernel_shap(model.inner.as_ref(), &row, &config, seed)
        .map_err(err)?
        .into())
}

#[pyfunction]
#[pyo3(name = "exact_shapley")]
fn py_exact_shapley(model: &PyModel, row: Vec<f64>, background: Vec<f64>) -> PyResult<PyAttribution> {
    Ok(exact_shapley(model.inner.as_ref(), &row, &background).map_err(err)?.into())
}

#[pyfunction]
#[pyo3(name = "explain_shlime", signature = (model, data, row, backgrounds, sign_policy="signed_product", seed=0))]
fn py_explain_shlime(
    model: &PyModel,
    data: &PyDataset,
    row: Vec<f64>,
    backgrounds: Vec<Vec<f64>>,
    sign_policy: &str,
    seed: u64,
) -> PyResult<PyAttribution> {
    let stats = fit_standardization(&data.inner).map_err(err)?;
    let sign_policy: SignPolicy = sign_policy.parse().map_err(err)?;
    let config = ShlimeConfig {
        lime: LimeConfig::default(),
        shap: ShapConfig {
            backgrounds,
            ..ShapConfig::single(row.clone())
        },
        sign_policy,
    };
    Ok(explain_shlime_basic(model.inner.as_ref(), &row, &stats, &config, seed)
        .map_err(err)?
        .into())
}

/// Returns `(detector, held-out evaluation set)`.
#[pyfunction]
#[pyo3(name = "train_ood_detector", signature = (data, mode="lime", n_per_instance=3, backgrounds=None, seed=0))]
fn py_train_ood_detector(
    data: &PyDataset,
    mode: &str,
    n_per_instance: usize,
    backgrounds: Option<Vec<Vec<f64>>>,
    seed: u64,
) -> PyResult<(PyDetector, PyDataset)> {
    let config = OodTrainConfig {
        n_per_instance,
        shap_backgrounds: backgrounds,
        ..OodTrainConfig::default()
    };
    let (det, eval) = train_ood_detector(&data.inner, parse_mode(mode)?, &config, seed).map_err(err)?;
    Ok((PyDetector { inner: det }, PyDataset { inner: eval }))
}

/// `f` on rows the detector calls real, `psi` on the rest.
#[pyfunction]
fn scaffold(f: &PyModel, psi: &PyModel, detector: &PyDetector) -> PyModel {
    let s = build_scaffold(f.inner.clone(), psi.inner.clone(), detector.inner.clone());
    PyModel {
        inner: Arc::new(s),
        kind: format!("scaffold({}, {})", f.kind, psi.kind),
    }
}

#[pyfunction]
#[pyo3(name = "fidelity")]
fn py_fidelity(e: &PyModel, f: &PyModel, data: &PyDataset) -> PyResult<f64> {
    fidelity(e.inner.as_ref(), f.inner.as_ref(), &data.inner).map_err(err)
}

/// Runs a TOML experiment config (or manifest) and returns the finished
/// manifest as TOML text.
#[pyfunction]
#[pyo3(signature = (config_path, out_dir, parallel=1))]
fn run_experiment(py: Python<'_>, config_path: PathBuf, out_dir: PathBuf, parallel: usize) -> PyResult<String> {
    let config = ExperimentConfig::load(&config_path).map_err(err)?;
    let outcome = py
        .detach(|| run_config(&config, &out_dir, parallel.max(1)))
        .map_err(err)?;
    Ok(outcome.manifest.to_toml_string())
}

#[pymodule]
fn pyxailab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyAttribution>()?;
    m.add_class::<PyDetector>()?;
    m.add_function(wrap_pyfunction!(biased_rule, m)?)?;
    m.add_function(wrap_pyfunction!(unbiased_rule, m)?)?;
    m.add_function(wrap_pyfunction!(py_explain_lime, m)?)?;
    m.add_function(wrap_pyfunction!(py_explain_kernel_shap, m)?)?;
    m.add_function(wrap_pyfunction!(py_exact_shapley, m)?)?;
    m.add_function(wrap_pyfunction!(py_explain_shlime, m)?)?;
    m.add_function(wrap_pyfunction!(py_train_ood_detector, m)?)?;
    m.add_function(wrap_pyfunction!(scaffold, m)?)?;
    m.add_function(wrap_pyfunction!(py_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
