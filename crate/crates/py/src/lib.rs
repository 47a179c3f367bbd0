//! Python bindings for the continuous attainment estimation library.
//!
//! Exposes the generalized gamma distribution, censor-aware target
//! construction and grid fitting, regional mixtures with generalized-entropy
//! decomposition, and the seeded verification sampler.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use edugamma::fitter::{
    self, build_targets, AgeGroup, AttainmentRecord, FitConfig, FitTargets, Sex,
};
use edugamma::gg::GgParams;
use edugamma::mixture::Region;
use edugamma::verify;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Generalized gamma distribution GG(a, beta, p).
#[pyclass(name = "GgParams", module = "edugamma_py", from_py_object)]
#[derive(Clone, Copy)]
struct PyGgParams {
    inner: GgParams,
}

#[pymethods]
impl PyGgParams {
    #[new]
    fn new(a: f64, beta: f64, p: f64) -> PyResult<Self> {
        Ok(PyGgParams { inner: GgParams::new(a, beta, p).map_err(value_err)? })
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p()
    }

    fn pdf(&self, x: f64) -> PyResult<f64> {
        self.inner.pdf(x).map_err(value_err)
    }

    fn cdf(&self, x: f64) -> PyResult<f64> {
        self.inner.cdf(x).map_err(value_err)
    }

    fn survival(&self, x: f64) -> PyResult<f64> {
        self.inner.survival(x).map_err(value_err)
    }

    fn quantile(&self, u: f64) -> PyResult<f64> {
        self.inner.quantile(u).map_err(value_err)
    }

    /// Mean years of schooling.
    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn first_moment_cdf(&self, x: f64) -> PyResult<f64> {
        self.inner.first_moment_cdf(x).map_err(value_err)
    }

    fn lorenz(&self, u: f64) -> PyResult<f64> {
        self.inner.lorenz(u).map_err(value_err)
    }

    fn gini(&self) -> f64 {
        self.inner.gini()
    }

    fn mld(&self) -> f64 {
        self.inner.mld()
    }

    fn theil(&self) -> f64 {
        self.inner.theil()
    }

    fn ge2(&self) -> f64 {
        self.inner.ge2()
    }

    /// Generalized entropy at arbitrary sensitivity theta.
    fn ge(&self, theta: f64) -> PyResult<f64> {
        self.inner.ge(theta).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "GgParams(a={}, beta={}, p={})",
            self.inner.a(),
            self.inner.beta(),
            self.inner.p()
        )
    }
}

/// Censor-aware fit targets: four cumulative thresholds with cumulative
/// probabilities plus the right-censored top mass.
#[pyclass(name = "FitTargets", module = "edugamma_py", skip_from_py_object)]
#[derive(Clone)]
struct PyFitTargets {
    inner: FitTargets,
}

#[pymethods]
impl PyFitTargets {
    #[new]
    fn new(thresholds: [f64; 4], cdf_targets: [f64; 4], surv_target: f64) -> PyResult<Self> {
        Ok(PyFitTargets {
            inner: FitTargets::new(thresholds, cdf_targets, surv_target).map_err(value_err)?,
        })
    }

    /// Build targets from category shares (ns, p, s, ti, tc) and the primary
    /// and secondary cycle durations in years.
    #[staticmethod]
    #[pyo3(signature = (shares, dur_primary, dur_secondary, year=2000, sex="total", age_group="15plus"))]
    fn from_shares(
        shares: [f64; 5],
        dur_primary: f64,
        dur_secondary: f64,
        year: i32,
        sex: &str,
        age_group: &str,
    ) -> PyResult<Self> {
        let record = AttainmentRecord {
            country: "PY".into(),
            year,
            sex: sex.parse::<Sex>().map_err(value_err)?,
            age_group: age_group.parse::<AgeGroup>().map_err(value_err)?,
            shares,
            dur_primary,
            dur_secondary,
        };
        Ok(PyFitTargets { inner: build_targets(&record).map_err(value_err)? })
    }

    #[getter]
    fn thresholds(&self) -> [f64; 4] {
        self.inner.thresholds
    }

    #[getter]
    fn cdf_targets(&self) -> [f64; 4] {
        self.inner.cdf_targets
    }

    #[getter]
    fn surv_target(&self) -> f64 {
        self.inner.surv_target
    }

    #[getter]
    fn flags(&self) -> Vec<String> {
        let text = self.inner.flags.to_string();
        if text.is_empty() {
            Vec::new()
        } else {
            text.split(';').map(str::to_string).collect()
        }
    }

    /// Sum of squared deviations of the model from these targets.
    fn objective(&self, params: &PyGgParams) -> f64 {
        fitter::objective(&params.inner, &self.inner)
    }
}

/// Result of a grid-restarted fit.
#[pyclass(name = "FitResult", module = "edugamma_py")]
struct PyFitResult {
    #[pyo3(get)]
    rss: f64,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    grid_a_start: f64,
    #[pyo3(get)]
    n_restarts_tried: usize,
    params: GgParams,
    flags: Vec<String>,
}

#[pymethods]
impl PyFitResult {
    #[getter]
    fn params(&self) -> PyGgParams {
        PyGgParams { inner: self.params }
    }

    #[getter]
    fn flags(&self) -> Vec<String> {
        self.flags.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "FitResult(a={}, beta={}, p={}, rss={:e}, converged={})",
            self.params.a(),
            self.params.beta(),
            self.params.p(),
            self.rss,
            self.converged
        )
    }
}

/// Grid-restarted nonlinear least squares on censor-aware targets.
#[pyfunction]
#[pyo3(signature = (targets, grid_min=0.2, grid_max=20.0, grid_step=0.2, max_iter=500, grad_tol=1e-10, obj_tol=1e-14))]
fn grid_fit(
    targets: &PyFitTargets,
    grid_min: f64,
    grid_max: f64,
    grid_step: f64,
    max_iter: usize,
    grad_tol: f64,
    obj_tol: f64,
) -> PyResult<PyFitResult> {
    let config = FitConfig { grid_min, grid_max, grid_step, max_iter, grad_tol, obj_tol };
    let fit = fitter::grid_fit(&targets.inner, &config).map_err(value_err)?;
    let flags_text = fit.flags.to_string();
    Ok(PyFitResult {
        rss: fit.rss,
        converged: fit.converged,
        grid_a_start: fit.grid_a_start,
        n_restarts_tried: fit.n_restarts_tried,
        params: fit.params,
        flags: if flags_text.is_empty() {
            Vec::new()
        } else {
            flags_text.split(';').map(str::to_string).collect()
        },
    })
}

/// Population-weighted mixture of national distributions.
#[pyclass(name = "Region", module = "edugamma_py")]
struct PyRegion {
    inner: Region,
}

#[pymethods]
impl PyRegion {
    #[new]
    fn new(members: Vec<(String, PyGgParams, f64)>) -> PyResult<Self> {
        let members: Vec<(String, GgParams, f64)> =
            members.into_iter().map(|(id, params, w)| (id, params.inner, w)).collect();
        Ok(PyRegion { inner: Region::new(members).map_err(value_err)? })
    }

    fn cdf(&self, x: f64) -> PyResult<f64> {
        self.inner.cdf(x).map_err(value_err)
    }

    fn pdf(&self, x: f64) -> PyResult<f64> {
        self.inner.pdf(x).map_err(value_err)
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn quantile(&self, u: f64) -> PyResult<f64> {
        self.inner.quantile(u).map_err(value_err)
    }

    fn lorenz(&self, u: f64) -> PyResult<f64> {
        self.inner.lorenz(u).map_err(value_err)
    }

    fn gini(&self) -> PyResult<f64> {
        self.inner.gini().map_err(value_err)
    }

    /// (total, between, within) generalized entropy at sensitivity theta.
    fn ge_decompose(&self, theta: f64) -> PyResult<(f64, f64, f64)> {
        let d = self.inner.ge_decompose(theta).map_err(value_err)?;
        Ok((d.total, d.between, d.within))
    }

    /// True when this region's CDF never exceeds the reference CDF on an
    /// evenly spaced grid over [0, x_max].
    #[pyo3(signature = (reference, x_max=25.0, points=2001))]
    fn first_order_dominates(
        &self,
        reference: &PyRegion,
        x_max: f64,
        points: usize,
    ) -> PyResult<bool> {
        Ok(self
            .inner
            .first_order_dominates(&reference.inner, x_max, points)
            .map_err(value_err)?
            .dominates)
    }

    fn __len__(&self) -> usize {
        self.inner.members().len()
    }
}

/// Deterministic generalized gamma sample (verification helper).
#[pyfunction]
fn sample_gg(params: &PyGgParams, n: usize, seed: u64) -> Vec<f64> {
    verify::sample_gg(&params.inner, n, seed)
}

#[pymodule]
fn edugamma_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGgParams>()?;
    m.add_class::<PyFitTargets>()?;
    m.add_class::<PyFitResult>()?;
    m.add_class::<PyRegion>()?;
    m.add_function(wrap_pyfunction!(grid_fit, m)?)?;
    m.add_function(wrap_pyfunction!(sample_gg, m)?)?;
    Ok(())
}
