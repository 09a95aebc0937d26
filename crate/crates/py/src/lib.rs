//! Python bindings for the `polarirs` simulator.

use std::path::PathBuf;

use num_complex::Complex64;
use polarirs::analytics::{ergodic_rate_closed_form, ergodic_rate_quadrature, GainDistribution, RateInputs};
use polarirs::harness::{self, RateRecord, Scheme, SimConfig};
use polarirs::irs::{self, VectorizedProblem};
use polarirs::linalg::{CMatrix, CVector};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(polarirs_py, PolarirsError, PyValueError);

fn err(e: polarirs::Error) -> PyErr {
    PolarirsError::new_err(e.to_string())
}

/// Simulation configuration; mirrors the JSON config format.
#[pyclass(name = "SimConfig", module = "polarirs_py", from_py_object)]
#[derive(Clone)]
struct PySimConfig {
    inner: SimConfig,
}

#[pymethods]
impl PySimConfig {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        SimConfig::from_json(text).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        SimConfig::load(path).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        harness::preset(name).map(|inner| Self { inner }).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    /// Checks every structural constraint; raises on the first violation.
    fn validate(&self) -> PyResult<()> {
        self.inner.prepare().map(|_| ()).map_err(err)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn trials(&self) -> usize {
        self.inner.trials
    }

    /// Setting a trial count also drops any per-L overrides.
    #[setter]
    fn set_trials(&mut self, trials: usize) {
        self.inner.trials = trials;
        self.inner.trials_by_elements.clear();
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn snr_db(&self) -> Vec<f64> {
        self.inner.snr_db.clone()
    }

    #[setter]
    fn set_snr_db(&mut self, v: Vec<f64>) {
        self.inner.snr_db = v;
    }

    #[getter]
    fn irs_elements(&self) -> Vec<usize> {
        self.inner.irs_elements.clone()
    }

    #[setter]
    fn set_irs_elements(&mut self, v: Vec<usize>) {
        self.inner.irs_elements = v;
    }

    #[getter]
    fn rx_antennas(&self) -> Vec<usize> {
        self.inner.rx_antennas.clone()
    }

    #[setter]
    fn set_rx_antennas(&mut self, v: Vec<usize>) {
        self.inner.rx_antennas = v;
    }

    #[getter]
    fn xi(&self) -> Vec<f64> {
        self.inner.xi.clone()
    }

    #[setter]
    fn set_xi(&mut self, v: Vec<f64>) {
        self.inner.xi = v;
    }

    #[getter]
    fn chi(&self) -> Vec<f64> {
        self.inner.chi.clone()
    }

    #[setter]
    fn set_chi(&mut self, v: Vec<f64>) {
        self.inner.chi = v;
    }

    #[getter]
    fn schemes(&self) -> Vec<&'static str> {
        self.inner.schemes.iter().map(|s| s.as_str()).collect()
    }

    #[setter]
    fn set_schemes(&mut self, v: Vec<String>) -> PyResult<()> {
        self.inner.schemes = v.iter().map(|s| Scheme::parse(s)).collect::<polarirs::Result<_>>().map_err(err)?;
        Ok(())
    }

    fn __repr__(&self) -> String {
        format!("SimConfig(name={:?}, trials={}, seed={})", self.inner.name, self.inner.trials, self.inner.seed)
    }
}

/// Mean rates at one grid point.
#[pyclass(name = "RateRecord", module = "polarirs_py", frozen, skip_from_py_object)]
struct PyRateRecord {
    inner: RateRecord,
}

#[pymethods]
impl PyRateRecord {
    #[getter]
    fn scheme(&self) -> &'static str {
        self.inner.scheme.as_str()
    }
    #[getter]
    fn snr_db(&self) -> f64 {
        self.inner.snr_db
    }
    #[getter(L)]
    fn elements(&self) -> usize {
        self.inner.elements
    }
    #[getter]
    fn xi(&self) -> f64 {
        self.inner.xi
    }
    #[getter]
    fn chi(&self) -> f64 {
        self.inner.chi
    }
    #[getter(N)]
    fn rx(&self) -> usize {
        self.inner.rx
    }
    #[getter]
    fn user_rates(&self) -> Vec<f64> {
        self.inner.user_rates.clone()
    }
    #[getter]
    fn sum_rate(&self) -> f64 {
        self.inner.sum_rate
    }
    #[getter]
    fn ci95(&self) -> f64 {
        self.inner.ci95
    }
    #[getter]
    fn trials(&self) -> usize {
        self.inner.trials
    }
    #[getter]
    fn degenerate(&self) -> usize {
        self.inner.degenerate
    }

    fn as_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        let r = &self.inner;
        d.set_item("scheme", r.scheme.as_str())?;
        d.set_item("snr_db", r.snr_db)?;
        d.set_item("L", r.elements)?;
        d.set_item("xi", r.xi)?;
        d.set_item("chi", r.chi)?;
        d.set_item("N", r.rx)?;
        d.set_item("user_rates", r.user_rates.clone())?;
        d.set_item("sum_rate", r.sum_rate)?;
        d.set_item("ci95", r.ci95)?;
        d.set_item("trials", r.trials)?;
        d.set_item("degenerate", r.degenerate)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        let r = &self.inner;
        format!("RateRecord({}, snr_db={}, L={}, sum_rate={:.4})", r.scheme.as_str(), r.snr_db, r.elements, r.sum_rate)
    }
}

fn wrap(records: Vec<RateRecord>) -> Vec<PyRateRecord> {
    records.into_iter().map(|inner| PyRateRecord { inner }).collect()
}

/// Monte Carlo sweep. `workers` defaults to the POLARIRS_WORKERS setting.
#[pyfunction]
#[pyo3(signature = (config, workers=None))]
fn run_sweep(py: Python<'_>, config: &PySimConfig, workers: Option<usize>) -> PyResult<Vec<PyRateRecord>> {
    let cfg = config.inner.clone();
    let records = py.detach(move || match workers {
        Some(w) => harness::run_sweep_with_workers(&cfg, w),
        None => harness::run_sweep(&cfg),
    });
    records.map(wrap).map_err(err)
}

/// Closed-form rates over the config's grid.
#[pyfunction]
fn analytic(config: &PySimConfig) -> PyResult<Vec<PyRateRecord>> {
    harness::analytic_records(&config.inner).map(wrap).map_err(err)
}

#[pyfunction]
fn to_csv(records: Vec<PyRef<'_, PyRateRecord>>) -> PyResult<String> {
    let owned: Vec<RateRecord> = records.iter().map(|r| r.inner.clone()).collect();
    let mut buf = Vec::new();
    harness::write_csv(&owned, &mut buf).map_err(err)?;
    String::from_utf8(buf).map_err(|e| PolarirsError::new_err(e.to_string()))
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    harness::PRESETS.to_vec()
}

/// Runs the built-in self-checks; returns `(name, passed, detail)` tuples.
#[pyfunction]
fn self_check() -> Vec<(&'static str, bool, String)> {
    polarirs::validation::run_checks().into_iter().map(|c| (c.name, c.passed, c.detail)).collect()
}

#[pyfunction]
fn meijer_log_gamma(m: u32, z: f64) -> PyResult<f64> {
    polarirs::analytics::meijer_log_gamma(m, z).map_err(err)
}

/// Distribution of the best-polarization gain.
#[pyclass(name = "GainDistribution", module = "polarirs_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyGainDistribution {
    inner: GainDistribution,
}

#[pymethods]
impl PyGainDistribution {
    #[new]
    fn new(kappa: u32, lam: f64, chi: f64) -> PyResult<Self> {
        GainDistribution::new(kappa, lam, chi).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn from_dimensions(rx: usize, streams: usize, lam: f64, chi: f64) -> PyResult<Self> {
        GainDistribution::from_dimensions(rx, streams, lam, chi).map(|inner| Self { inner }).map_err(err)
    }

    #[getter]
    fn kappa(&self) -> u32 {
        self.inner.kappa
    }
    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }
    #[getter]
    fn chi(&self) -> f64 {
        self.inner.chi
    }

    fn cdf(&self, x: f64) -> PyResult<f64> {
        self.inner.cdf(x).map_err(err)
    }

    fn pdf(&self, x: f64) -> PyResult<f64> {
        self.inner.pdf(x).map_err(err)
    }

    /// `E[log2(1 + ᾱh) - log2(1 + α̃h)]`; `method` is "closed_form" or "quadrature".
    #[pyo3(signature = (alpha_bar, alpha_tilde, method="closed_form"))]
    fn ergodic_rate(&self, alpha_bar: f64, alpha_tilde: f64, method: &str) -> PyResult<f64> {
        let inputs = RateInputs::new(alpha_bar, alpha_tilde, self.inner).map_err(err)?;
        match method {
            "closed_form" => ergodic_rate_closed_form(&inputs),
            "quadrature" => ergodic_rate_quadrature(&inputs),
            other => return Err(PolarirsError::new_err(format!("unknown method {other:?}"))),
        }
        .map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("GainDistribution(kappa={}, lam={}, chi={})", self.inner.kappa, self.inner.lambda, self.inner.chi)
    }
}

/// Minimizes `‖K θ + d‖²` over `|θ_l| ≤ 1`. `k` is a list of rows.
/// Returns a dict with `theta`, `objective`, `kkt_residual`, `iterations`, `converged`.
#[pyfunction]
#[pyo3(signature = (k, d, tol=irs::DEFAULT_TOL, max_iter=irs::DEFAULT_MAX_ITER))]
fn solve_constrained_ls<'py>(
    py: Python<'py>,
    k: Vec<Vec<Complex64>>,
    d: Vec<Complex64>,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let rows = k.len();
    let cols = k.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || k.iter().any(|r| r.len() != cols) || d.len() != rows {
        return Err(PolarirsError::new_err(format!("need a non-empty rectangular k and len(d) == rows ({rows})")));
    }
    let km = CMatrix::from_fn(rows, cols, |i, j| k[i][j]);
    let p = VectorizedProblem::new(km, CVector::from_vec(d));
    let sol = py.detach(|| irs::solve_constrained_ls(&p, tol, max_iter));
    let out = PyDict::new(py);
    out.set_item("theta", sol.theta.iter().copied().collect::<Vec<Complex64>>())?;
    out.set_item("objective", sol.objective)?;
    out.set_item("kkt_residual", sol.kkt_residual)?;
    out.set_item("iterations", sol.iterations)?;
    out.set_item("converged", sol.converged)?;
    Ok(out)
}

#[pymodule]
fn polarirs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PolarirsError", m.py().get_type::<PolarirsError>())?;
    m.add_class::<PySimConfig>()?;
    m.add_class::<PyRateRecord>()?;
    m.add_class::<PyGainDistribution>()?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(analytic, m)?)?;
    m.add_function(wrap_pyfunction!(to_csv, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(self_check, m)?)?;
    m.add_function(wrap_pyfunction!(meijer_log_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(solve_constrained_ls, m)?)?;
    m.add("WORKERS_ENV", harness::WORKERS_ENV)?;
    Ok(())
}
