//! Python bindings. The module mirrors the CLI's view of the library: build
//! a channel model, query correlations, maximize the Bell parameter, render
//! sweep CSVs and run the closed-form-versus-reference validation.

use bellcat::bell::{
    bell_value, chsh_quantum_bound, maximize_bell, BellSettings, CorrelationModel,
    MeasurementSetting, OptimizerConfig, CHSH_CLASSICAL_BOUND,
};
use bellcat::cli::{build_model, sweep_csv, ExperimentConfig, SWEEP_HEADER};
use bellcat::oracle::{run_validation, VALIDATION_CHANNELS};
use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(err: bellcat::Error) -> PyErr {
    use bellcat::Error as E;
    match err {
        E::InvalidParameter(_) | E::Config(_) => PyValueError::new_err(err.to_string()),
        E::Io(_) => PyIOError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn config_from_kwargs(
    channel: &str,
    d: f64,
    n_spins: usize,
    gamma0: f64,
    gamma: f64,
    nbar: f64,
    g: f64,
    x: f64,
    k_t: f64,
) -> ExperimentConfig {
    ExperimentConfig {
        channel: channel.to_string(),
        d,
        n_spins,
        gamma0,
        gamma,
        nbar,
        g,
        x,
        k_t,
        ..ExperimentConfig::default()
    }
}

/// Optimizer outcome: the Bell maximum and the measurement settings that
/// attain it.
#[pyclass(frozen)]
struct BellResult {
    #[pyo3(get)]
    value: f64,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    theta: f64,
    #[pyo3(get)]
    theta_prime: f64,
    #[pyo3(get)]
    beta: (f64, f64),
    #[pyo3(get)]
    beta_prime: (f64, f64),
}

#[pymethods]
impl BellResult {
    fn __repr__(&self) -> String {
        format!(
            "BellResult(value={:.6}, converged={}, theta={:.4}, theta_prime={:.4})",
            self.value, self.converged, self.theta, self.theta_prime
        )
    }
}

/// One open-system channel of the qubit-oscillator cat state. The sweep
/// variable `t` means: damping probability for the four Markov channels,
/// scaled interaction time for `spinstar`, gamma0*t for `postmarkov` and
/// omega_c*t for `brownian`.
#[pyclass(frozen)]
struct Model {
    inner: Box<dyn CorrelationModel + Send + Sync>,
    channel: String,
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (channel, *, d = 2.0, n_spins = 5, gamma0 = 1.0, gamma = 0.1, nbar = 0.0, g = 0.3, x = 10.0, k_t = 25.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        channel: &str,
        d: f64,
        n_spins: usize,
        gamma0: f64,
        gamma: f64,
        nbar: f64,
        g: f64,
        x: f64,
        k_t: f64,
    ) -> PyResult<Self> {
        let cfg = config_from_kwargs(channel, d, n_spins, gamma0, gamma, nbar, g, x, k_t);
        let inner = build_model(&cfg).map_err(to_py)?;
        Ok(Model { inner, channel: channel.to_string() })
    }

    /// (F_s, F_c) with C = sin(theta) F_s + cos(theta) F_c.
    fn components(&self, beta: Complex64, t: f64) -> PyResult<(f64, f64)> {
        self.inner.components(beta, t).map_err(to_py)
    }

    fn correlation(&self, theta: f64, beta: Complex64, t: f64) -> PyResult<f64> {
        self.inner.correlation(theta, beta, t).map_err(to_py)
    }

    /// CHSH combination for explicit settings (theta, beta, theta', beta').
    fn bell_value(
        &self,
        theta: f64,
        beta: Complex64,
        theta_prime: f64,
        beta_prime: Complex64,
        t: f64,
    ) -> PyResult<f64> {
        let settings = BellSettings {
            unprimed: MeasurementSetting { theta, beta },
            primed: MeasurementSetting { theta: theta_prime, beta: beta_prime },
        };
        bell_value(self.inner.as_ref(), &settings, t).map_err(to_py)
    }

    #[pyo3(signature = (t, *, restarts = 64, seed = 7))]
    fn max_bell(&self, t: f64, restarts: usize, seed: u64) -> PyResult<BellResult> {
        let cfg = OptimizerConfig { restarts, seed, ..OptimizerConfig::default() };
        let m = maximize_bell(self.inner.as_ref(), t, &cfg).map_err(to_py)?;
        Ok(BellResult {
            value: m.value,
            converged: m.converged,
            theta: m.settings.unprimed.theta,
            theta_prime: m.settings.primed.theta,
            beta: (m.settings.unprimed.beta.re, m.settings.unprimed.beta.im),
            beta_prime: (m.settings.primed.beta.re, m.settings.primed.beta.im),
        })
    }

    fn descriptor(&self) -> String {
        self.inner.descriptor()
    }

    fn __repr__(&self) -> String {
        format!("Model(channel='{}')", self.channel)
    }
}

/// Correlation of the undamped cat state.
#[pyfunction]
fn pure_correlation(theta: f64, beta: Complex64, d: f64) -> f64 {
    bellcat::bell::pure_state_correlation(theta, beta, d)
}

/// Coherence suppression factor |cos 2 tau|^N of the spin-star channel.
#[pyfunction]
fn trace_distance(tau_s: f64, n_spins: usize) -> f64 {
    bellcat::spinstar::trace_distance(tau_s, n_spins)
}

#[pyfunction]
fn classical_bound() -> f64 {
    CHSH_CLASSICAL_BOUND
}

#[pyfunction]
fn quantum_bound() -> f64 {
    chsh_quantum_bound()
}

/// Sweep the Bell maximum along a channel's grid and return the CSV text,
/// identical to what `bellcat sweep` writes.
#[pyfunction]
#[pyo3(signature = (channel, *, grid_start = 0.0, grid_end = 1.0, grid_points = 21, d = 2.0, restarts = 64, seed = 7, n_spins = 5, gamma0 = 1.0, gamma = 0.1, nbar = 0.0, g = 0.3, x = 10.0, k_t = 25.0))]
#[allow(clippy::too_many_arguments)]
fn sweep(
    channel: &str,
    grid_start: f64,
    grid_end: f64,
    grid_points: usize,
    d: f64,
    restarts: usize,
    seed: u64,
    n_spins: usize,
    gamma0: f64,
    gamma: f64,
    nbar: f64,
    g: f64,
    x: f64,
    k_t: f64,
) -> PyResult<String> {
    let mut cfg = config_from_kwargs(channel, d, n_spins, gamma0, gamma, nbar, g, x, k_t);
    cfg.grid_start = grid_start;
    cfg.grid_end = grid_end;
    cfg.grid_points = grid_points;
    cfg.restarts = restarts;
    cfg.seed = seed;
    sweep_csv(&cfg).map_err(to_py)
}

/// Cross-check the closed forms against the dense references. Returns
/// (all_pass, checks_run, failures) and prints nothing.
#[pyfunction]
#[pyo3(signature = (channels = None, *, cutoff = 60, points = 50))]
fn validate(channels: Option<Vec<String>>, cutoff: usize, points: usize) -> PyResult<(bool, usize, usize)> {
    let selected: Vec<&str> = match &channels {
        Some(list) => list.iter().map(String::as_str).collect(),
        None => VALIDATION_CHANNELS.to_vec(),
    };
    for name in &selected {
        if !VALIDATION_CHANNELS.contains(name) {
            return Err(PyValueError::new_err(format!(
                "unknown channel '{name}' (expected one of {})",
                VALIDATION_CHANNELS.join(", ")
            )));
        }
    }
    let report = run_validation(&selected, cutoff, points).map_err(to_py)?;
    Ok((report.all_pass(), report.lines.len(), report.failures().len()))
}

#[pymodule]
fn bellcat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<BellResult>()?;
    m.add_function(wrap_pyfunction!(pure_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(trace_distance, m)?)?;
    m.add_function(wrap_pyfunction!(classical_bound, m)?)?;
    m.add_function(wrap_pyfunction!(quantum_bound, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add("SWEEP_HEADER", SWEEP_HEADER)?;
    m.add("CHANNELS", VALIDATION_CHANNELS.to_vec())?;
    Ok(())
}
