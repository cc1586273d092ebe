//! Python bindings: the separable cell, exponents and the JSON run interface.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use lecell::report::{Effort, RunConfig, Task};
use lecell::separable::{solve_phip, ShootingResult};
use lecell::{Error, ExponentParams};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Window(_) | Error::Config(_) | Error::InvalidGrid(_) | Error::Json(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// `(N+1)/(N-1)`.
#[pyfunction]
fn critical_exponent(dim: usize) -> f64 {
    lecell::critical_exponent(dim)
}

/// Half-sphere profile `φ_p` for `(N+1)/(N-1) < p`.
#[pyclass(frozen)]
struct SeparableCell {
    inner: ShootingResult,
}

#[pymethods]
impl SeparableCell {
    #[new]
    #[pyo3(signature = (dim, p, tol = 1e-8))]
    fn new(dim: usize, p: f64, tol: f64) -> PyResult<Self> {
        let params = ExponentParams::new(dim, p).map_err(to_py)?;
        params.require_supercritical().map_err(to_py)?;
        Ok(Self {
            inner: solve_phip(&params, tol).map_err(to_py)?,
        })
    }

    #[getter]
    fn s_star(&self) -> f64 {
        self.inner.s_star
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual
    }

    #[getter]
    fn max_value(&self) -> f64 {
        self.inner.max_value()
    }

    /// `φ_p(α)`.
    fn eval(&self, alpha: f64) -> f64 {
        self.inner.eval(alpha)
    }

    /// Grid nodes and values.
    fn profile(&self) -> (Vec<f64>, Vec<f64>) {
        (self.inner.profile.grid.nodes().to_vec(), self.inner.profile.values.clone())
    }

    /// `u₀(x) = |x|^{-2/(p-1)} φ_p(angle from the inner normal)`.
    fn u0(&self, x: Vec<f64>) -> PyResult<f64> {
        lecell::separable::u0_eval(&x, &self.inner).map_err(to_py)
    }
}

/// Runs a JSON run configuration (the `config.json` format) and writes its
/// artifacts; returns the JSON report.
#[pyfunction]
fn run(config_json: &str) -> PyResult<String> {
    let cfg = RunConfig::from_json(config_json).map_err(to_py)?;
    let rep = lecell::run::run(&cfg).map_err(to_py)?;
    rep.to_json().map_err(to_py)
}

/// Runs acceptance criteria without writing files; returns `(passed, report_json)`.
#[pyfunction]
#[pyo3(signature = (criteria = Vec::new(), quick = true))]
fn verify(criteria: Vec<u8>, quick: bool) -> PyResult<(bool, String)> {
    let cfg = RunConfig::new(
        Task::Verify {
            criteria,
            effort: if quick { Effort::Quick } else { Effort::Full },
        },
        "",
    );
    let rep = lecell::run::execute(&cfg).map_err(to_py)?;
    Ok((rep.passed, rep.to_json().map_err(to_py)?))
}

#[pymodule]
fn lecell_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(critical_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_class::<SeparableCell>()?;
    Ok(())
}
