//! Python bindings: spectral data, evolution, classification and the
//! configuration-driven experiment runner.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use critheat::experiments::{self, ExperimentConfig};
use critheat::ground_state::kappa_const;
use critheat::solver::{self, RunRecord};
use critheat::spectral::{self, SpectralData};
use critheat::{Error, GridSettings, Params, RadialGrid};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Parse(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Parses `[initial]`, `[solver]` and `[classify]` tables given as TOML bodies.
fn partial_config(initial: &str, solver: &str, classify: &str) -> PyResult<ExperimentConfig> {
    let text = format!("[initial]\n{initial}\n[solver]\n{solver}\n[classify]\n{classify}\n");
    ExperimentConfig::from_toml(&text).map_err(to_py)
}

/// Exponents of the problem in dimension `d`.
#[pyclass(name = "Params", frozen)]
struct PyParams {
    inner: Params,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (d = 7, exploratory = false))]
    fn new(d: u32, exploratory: bool) -> PyResult<Self> {
        let inner = if exploratory { Params::exploratory(d) } else { Params::new(d) }.map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn d(&self) -> u32 {
        self.inner.d()
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p()
    }

    /// `κ = (p-1)^{-1/(p-1)}`.
    #[getter]
    fn kappa(&self) -> f64 {
        kappa_const(&self.inner)
    }

    /// Unstable eigenvalue by shooting.
    fn shoot_e0(&self) -> PyResult<f64> {
        spectral::shoot_e0(&self.inner).map_err(to_py)
    }
}

/// Ground state, unstable mode and kernel profile on a radial grid.
#[pyclass(name = "Spectral", frozen)]
struct PySpectral {
    inner: Arc<SpectralData>,
}

#[pymethods]
impl PySpectral {
    #[new]
    #[pyo3(signature = (d = 7, cells = 4000, r_max = 100.0, first_cell = 1e-4, m = spectral::DEFAULT_M))]
    fn new(d: u32, cells: usize, r_max: f64, first_cell: f64, m: f64) -> PyResult<Self> {
        let params = Params::new(d).map_err(to_py)?;
        let grid = RadialGrid::new(&GridSettings { cells, r_max, first_cell }, &params).map_err(to_py)?;
        let inner = SpectralData::compute(&params, Arc::new(grid), m).map_err(to_py)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[getter]
    fn e0(&self) -> f64 {
        self.inner.e0
    }

    #[getter]
    fn y_mass(&self) -> f64 {
        self.inner.y_mass
    }

    #[getter]
    fn negative_eigenvalues(&self) -> usize {
        self.inner.op.negative_count()
    }

    /// `‖H𝒴 + e₀𝒴‖ / ‖𝒴‖`.
    fn eigen_residual(&self) -> f64 {
        self.inner.eigen_residual()
    }

    fn nodes(&self) -> Vec<f64> {
        self.inner.grid.nodes().to_vec()
    }

    fn q(&self) -> Vec<f64> {
        self.inner.q.values().to_vec()
    }

    /// Unit-L² unstable eigenfunction.
    fn y(&self) -> Vec<f64> {
        self.inner.y.values().to_vec()
    }

    fn psi0(&self) -> Vec<f64> {
        self.inner.psi0.values().to_vec()
    }

    /// Minimum Rayleigh quotients `(c1, c2, c3)` over projected random fields.
    #[pyo3(signature = (samples = 1000, seed = 0))]
    fn coercivity(&self, py: Python<'_>, samples: usize, seed: u64) -> PyResult<(f64, f64, f64)> {
        let spec = self.inner.clone();
        let r = py
            .detach(move || spectral::coercivity_estimate(&spec, samples, seed))
            .map_err(to_py)?;
        Ok((r.c1, r.c2, r.c3))
    }
}

/// Time series of one run.
#[pyclass(name = "RunRecord", frozen)]
struct PyRunRecord {
    inner: RunRecord,
}

#[pymethods]
impl PyRunRecord {
    /// `"dissipation"`, `"blowup"` or `"trapped_at_horizon"`.
    #[getter]
    fn verdict(&self) -> &'static str {
        self.inner.verdict.name()
    }

    #[getter]
    fn blowup_time(&self) -> Option<f64> {
        self.inner.blowup_time.map(|t| t.value())
    }

    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    fn linf(&self) -> Vec<f64> {
        self.inner.linf_trace.clone()
    }

    fn h1dot(&self) -> Vec<f64> {
        self.inner.h1dot_trace.clone()
    }

    fn energy(&self) -> Vec<f64> {
        self.inner.energy_trace.clone()
    }

    fn final_field(&self) -> Vec<f64> {
        self.inner.final_field.values().to_vec()
    }

    /// `(κ̂, exponent)` of a blow-up run.
    fn rate(&self) -> PyResult<(f64, f64)> {
        critheat::selfsim::rate_check(&self.inner, None).map_err(to_py)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

/// Evolves initial data described by a TOML body such as
/// `family = "q_plus_y"\nc = 0.05`; `solver` holds `[solver]` keys.
#[pyfunction]
#[pyo3(signature = (spectral, initial, solver = "", seed = 0))]
fn evolve(py: Python<'_>, spectral: &PySpectral, initial: &str, solver: &str, seed: u64) -> PyResult<PyRunRecord> {
    let cfg = partial_config(initial, solver, "")?;
    let spec = spectral.inner.clone();
    let inner = py
        .detach(move || {
            let u0 = cfg.initial.as_ref().expect("parsed").build(&spec, seed)?;
            solver::evolve(&u0, &cfg.solver, &spec.params)
        })
        .map_err(to_py)?;
    Ok(PyRunRecord { inner })
}

/// Trichotomy verdict and its evidence as a JSON string.
#[pyfunction]
#[pyo3(signature = (spectral, initial, solver = "", classify = "", seed = 0))]
fn classify(
    py: Python<'_>,
    spectral: &PySpectral,
    initial: &str,
    solver: &str,
    classify: &str,
    seed: u64,
) -> PyResult<(String, String)> {
    let cfg = partial_config(initial, solver, classify)?;
    let spec = spectral.inner.clone();
    let c = py
        .detach(move || {
            let u0 = cfg.initial.as_ref().expect("parsed").build(&spec, seed)?;
            experiments::classify(&u0, &spec, &cfg.solver, &cfg.classify, cfg.selfsim.y_intervals)
        })
        .map_err(to_py)?;
    let evidence = serde_json::to_string(&c.evidence).expect("evidence serializes");
    Ok((c.verdict.name().to_string(), evidence))
}

/// Runs a full TOML configuration; returns the manifest summary as JSON.
#[pyfunction]
#[pyo3(signature = (config, kind = None, out = None))]
fn run_config(py: Python<'_>, config: &str, kind: Option<&str>, out: Option<&str>) -> PyResult<String> {
    let mut cfg = ExperimentConfig::from_toml(config).map_err(to_py)?;
    if let Some(k) = kind {
        let k = toml_kind(k)?;
        cfg = cfg.with_kind(k).map_err(to_py)?;
    }
    if let Some(o) = out {
        cfg.out = o.into();
    }
    let s = py.detach(move || experiments::run_config(&cfg)).map_err(to_py)?;
    Ok(serde_json::to_string(&s.summary).expect("summary serializes"))
}

fn toml_kind(k: &str) -> PyResult<experiments::ExperimentKind> {
    let cfg = ExperimentConfig::from_toml(&format!("kind = \"{k}\"\n")).map_err(to_py)?;
    Ok(cfg.kind.expect("kind parsed"))
}

#[pymodule]
fn critheat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PySpectral>()?;
    m.add_class::<PyRunRecord>()?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
