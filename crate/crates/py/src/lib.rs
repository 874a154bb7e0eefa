//! Python bindings: simulate data, fit mixtures, score partitions.

use mixgrad::em::{em_fit_gmm, initial_mixture, EmConfig};
use mixgrad::metrics::EvalReport;
use mixgrad::models::{self, Family, InitStrategy, ModelSpec, ParamSet};
use mixgrad::optim::{Method, OptConfig};
use mixgrad::simulate::{sample_mixture, SimSpec};
use mixgrad::{Dataset, MixtureParams};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: mixgrad::Error) -> PyErr {
    match e {
        mixgrad::Error::Ad(_) | mixgrad::Error::Component { .. } | mixgrad::Error::Numeric(_) => {
            PyArithmeticError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn dataset(x: Vec<Vec<f64>>) -> PyResult<Dataset> {
    Dataset::from_rows(&x).map_err(py_err)
}

/// Mixture parameters in natural (constrained) form.
#[pyclass(module = "pymixgrad", name = "Mixture", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMixture {
    inner: MixtureParams,
}

#[pymethods]
impl PyMixture {
    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    #[getter]
    fn means(&self) -> Vec<Vec<f64>> {
        self.inner.means.clone()
    }

    /// One `p × p` nested list per component.
    #[getter]
    fn covariances(&self) -> Vec<Vec<Vec<f64>>> {
        let p = self.inner.p();
        self.inner
            .covs
            .iter()
            .map(|c| c.chunks(p).map(<[f64]>::to_vec).collect())
            .collect()
    }

    /// Degrees of freedom for t mixtures, otherwise `None`.
    #[getter]
    fn dofs(&self) -> Option<Vec<f64>> {
        self.inner.dofs.clone()
    }

    /// Total log-likelihood of the rows of `x`.
    fn loglik(&self, x: Vec<Vec<f64>>) -> PyResult<f64> {
        self.inner.total_loglik(&dataset(x)?).map_err(py_err)
    }

    fn responsibilities(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let d = dataset(x)?;
        let a = self.inner.responsibilities(&d).map_err(py_err)?;
        Ok((0..d.n()).map(|i| a.row(i).to_vec()).collect())
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        Ok(self
            .inner
            .responsibilities(&dataset(x)?)
            .map_err(py_err)?
            .labels)
    }

    fn __repr__(&self) -> String {
        format!("Mixture(k={}, p={})", self.inner.k(), self.inner.p())
    }
}

/// Outcome of [`fit`].
#[pyclass(module = "pymixgrad", name = "FitResult", frozen, get_all)]
pub struct PyFitResult {
    pub mixture: Py<PyMixture>,
    /// Unconstrained parameter vector; `None` for EM.
    pub theta: Option<Vec<f64>>,
    /// Mean log-likelihood per iteration, starting at the initial value.
    pub trajectory: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    pub diverged: bool,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_params: usize,
    pub labels: Vec<usize>,
}

#[pymethods]
impl PyFitResult {
    fn __repr__(&self) -> String {
        format!(
            "FitResult(loglik={:.4}, iters={}, converged={})",
            self.loglik, self.iters, self.converged
        )
    }
}

fn spec_for(
    model: &str,
    constraint: Option<&str>,
    k: usize,
    p: usize,
    q: Option<usize>,
) -> PyResult<ModelSpec> {
    let family = Family::parse(model, constraint).map_err(py_err)?;
    ModelSpec::new(family, k, p, q).map_err(py_err)
}

/// Draws a labelled dataset from a random Gaussian mixture.
///
/// Returns `(x, labels, truth)`.
#[pyfunction]
#[pyo3(signature = (n, p, k, seed = 0, scale = 5.0, cov = "full", imbalance = false, noise_features = 0))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    n: usize,
    p: usize,
    k: usize,
    seed: u64,
    scale: f64,
    cov: &str,
    imbalance: bool,
    noise_features: usize,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>, PyMixture)> {
    let spec = SimSpec {
        scale,
        covariance_mode: cov.parse().map_err(py_err)?,
        imbalance,
        noise_features,
        ..SimSpec::new(n, p, k, seed)
    };
    let sim = sample_mixture(&spec).map_err(py_err)?;
    let x = sim.data.rows().map(<[f64]>::to_vec).collect();
    let labels = sim
        .data
        .labels()
        .expect("simulated data is labelled")
        .to_vec();
    Ok((x, labels, PyMixture { inner: sim.truth }))
}

/// Fits a mixture by gradient ascent (`gd`, `adam`, `newton-cg`) or, for
/// `gmm` only, by EM.
#[pyfunction]
#[pyo3(signature = (
    x, k, model = "gmm", constraint = None, q = None, method = "adam", lr = None,
    max_iter = 1000, tol = 1e-6, init = "kmeans", seed = 0, ridge = 1e-6
))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    k: usize,
    model: &str,
    constraint: Option<&str>,
    q: Option<usize>,
    method: &str,
    lr: Option<f64>,
    max_iter: usize,
    tol: f64,
    init: &str,
    seed: u64,
    ridge: f64,
) -> PyResult<PyFitResult> {
    let data = dataset(x)?;
    let spec = spec_for(model, constraint, k, data.p(), q)?;
    let strategy: InitStrategy = init.parse().map_err(py_err)?;
    let means = models::initial_means(&data, k, strategy, seed).map_err(py_err)?;
    let d = spec.param_count();

    let (params, theta, fit_meta, loglik, labels) = if method.eq_ignore_ascii_case("em") {
        if spec.family != Family::Gmm {
            return Err(PyValueError::new_err("em is only available for gmm"));
        }
        let cfg = EmConfig {
            max_iter,
            tol,
            ridge,
            seed,
        };
        let r = py
            .detach(|| em_fit_gmm(&data, initial_mixture(&means), &cfg))
            .map_err(py_err)?;
        let ll = r.params.total_loglik(&data).map_err(py_err)?;
        let labels = r.params.responsibilities(&data).map_err(py_err)?.labels;
        let meta = (r.trajectory, r.iters, r.converged, r.diverged);
        (r.params, None, meta, ll, labels)
    } else {
        let m: Method = method.parse().map_err(py_err)?;
        let mut cfg = OptConfig::new(m);
        cfg.lr = lr.unwrap_or(cfg.lr);
        cfg.max_iter = max_iter;
        cfg.tol = tol;
        cfg.seed = seed;
        let start = ParamSet::from_means(spec, &means).map_err(py_err)?;
        let r = py
            .detach(|| models::fit_model(&data, &start, &cfg))
            .map_err(py_err)?;
        let ll = models::total_loglik(&r.params, &data).map_err(py_err)?;
        let labels = models::responsibilities(&r.params, &data)
            .map_err(py_err)?
            .labels;
        let params = r.params.constrained().map_err(py_err)?;
        let meta = (r.trajectory, r.iters, r.converged, r.diverged);
        (params, Some(r.params.theta), meta, ll, labels)
    };
    let report = EvalReport::new(loglik, d, data.n(), None);
    let (trajectory, iters, converged, diverged) = fit_meta;
    Ok(PyFitResult {
        mixture: Py::new(py, PyMixture { inner: params })?,
        theta,
        trajectory,
        iters,
        converged,
        diverged,
        loglik,
        aic: report.aic,
        bic: report.bic,
        n_params: d,
        labels,
    })
}

/// Adjusted Rand index between two labelings.
#[pyfunction]
fn ari(a: Vec<i64>, b: Vec<i64>) -> PyResult<f64> {
    mixgrad::metrics::ari(&a, &b).map_err(py_err)
}

#[pyfunction]
fn aic(total_loglik: f64, d: usize) -> f64 {
    mixgrad::metrics::aic(total_loglik, d)
}

#[pyfunction]
fn bic(total_loglik: f64, d: usize, n: usize) -> f64 {
    mixgrad::metrics::bic(total_loglik, d, n)
}

/// Number of free parameters of a model.
#[pyfunction]
#[pyo3(signature = (model, k, p, constraint = None, q = None))]
fn param_count(
    model: &str,
    k: usize,
    p: usize,
    constraint: Option<&str>,
    q: Option<usize>,
) -> PyResult<usize> {
    Ok(spec_for(model, constraint, k, p, q)?.param_count())
}

/// `(l_n, dl_n/dx, tape length)` for the logistic map.
#[pyfunction]
fn logistic_map_grad(x: f64, n: usize) -> PyResult<(f64, f64, usize)> {
    mixgrad::autodiff::demos::logistic_map_grad(x, n).map_err(|e| py_err(e.into()))
}

/// `(l_n, dl_n/dx)` for the nested sigmoid chain.
#[pyfunction]
fn nested_sigmoid_grad(x: f64, n: usize) -> PyResult<(f64, f64)> {
    mixgrad::autodiff::demos::nested_sigmoid_grad(x, n).map_err(|e| py_err(e.into()))
}

#[pymodule]
fn pymixgrad(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMixture>()?;
    m.add_class::<PyFitResult>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(ari, m)?)?;
    m.add_function(wrap_pyfunction!(aic, m)?)?;
    m.add_function(wrap_pyfunction!(bic, m)?)?;
    m.add_function(wrap_pyfunction!(param_count, m)?)?;
    m.add_function(wrap_pyfunction!(logistic_map_grad, m)?)?;
    m.add_function(wrap_pyfunction!(nested_sigmoid_grad, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
