//! Python bindings: lattices, weighted sequences, the Birkhoff maps, the
//! time integrator and the scan drivers.

use kdv_core::data::{self, DataFamily, DataSpec};
use kdv_core::experiments::{self, ScanConfig};
use kdv_core::flows::{self, FlowConfig};
use kdv_core::hamiltonians::{self, HamiltonianKind, HamiltonianSpec};
use kdv_core::solver::{self, SolverConfig};
use kdv_core::spectral::{self, GridFunction, ModeLattice, NormSpec, SpectralSequence};
use kdv_core::Error;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(kdvlab, InvalidConfigError, PyValueError);
create_exception!(kdvlab, DivergenceError, PyRuntimeError);

fn py_err(err: Error) -> PyErr {
    match err {
        Error::InvalidConfig(_) => InvalidConfigError::new_err(err.to_string()),
        Error::SolverDivergence { .. } | Error::FlowDivergence { .. } => DivergenceError::new_err(err.to_string()),
        Error::InvalidInput(_) | Error::Json(_) => PyValueError::new_err(err.to_string()),
        Error::Io(_) => PyRuntimeError::new_err(err.to_string()),
    }
}

fn to_py_json<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn kind(name: &str) -> PyResult<HamiltonianSpec> {
    let kind = match name {
        "lambda2" => HamiltonianKind::Lambda2,
        "h3" => HamiltonianKind::H3,
        "f1" => HamiltonianKind::F1,
        "f2" => HamiltonianKind::F2,
        "quartic_resonant" => HamiltonianKind::QuarticResonant,
        other => return Err(PyValueError::new_err(format!("unknown Hamiltonian {other:?}"))),
    };
    Ok(HamiltonianSpec::new(kind))
}

/// Symmetric truncation `|k| ≤ n` with an `m`-point physical grid.
#[pyclass(name = "Lattice", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyLattice(ModeLattice);

#[pymethods]
impl PyLattice {
    #[new]
    #[pyo3(signature = (n, m=None))]
    fn new(n: usize, m: Option<usize>) -> PyResult<Self> {
        let lattice = match m {
            Some(m) => ModeLattice::new(n, m),
            None => ModeLattice::with_radius(n),
        };
        lattice.map(Self).map_err(py_err)
    }

    #[getter]
    fn radius(&self) -> usize {
        self.0.radius()
    }

    #[getter]
    fn grid_size(&self) -> usize {
        self.0.grid_size()
    }

    fn modes(&self) -> Vec<i64> {
        self.0.modes().collect()
    }

    fn grid_points(&self) -> Vec<f64> {
        self.0.grid_points()
    }

    fn __repr__(&self) -> String {
        format!("Lattice(n={}, m={})", self.0.radius(), self.0.grid_size())
    }
}

/// Fourier coefficients indexed by the modes of a lattice.
#[pyclass(name = "Sequence", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySequence(SpectralSequence);

#[pymethods]
impl PySequence {
    #[staticmethod]
    fn zeros(lattice: PyLattice) -> Self {
        Self(SpectralSequence::zeros(lattice.0))
    }

    /// `values[i]` is the coefficient of mode `lattice.modes()[i]`.
    #[staticmethod]
    #[pyo3(signature = (lattice, values, real_type=true))]
    fn from_values(lattice: PyLattice, values: Vec<Complex64>, real_type: bool) -> PyResult<Self> {
        SpectralSequence::from_values(lattice.0, values, real_type)
            .map(Self)
            .map_err(py_err)
    }

    /// Weighted coefficients `v̂(k)/√|k|` of zero-mean grid samples.
    #[staticmethod]
    fn from_physical(lattice: PyLattice, samples: Vec<f64>) -> PyResult<Self> {
        let v = GridFunction::new(lattice.0, samples).map_err(py_err)?;
        Ok(Self(spectral::weighted_from_physical(&v)))
    }

    fn to_physical(&self) -> PyResult<Vec<f64>> {
        spectral::physical_from_weighted(&self.0)
            .map(|v| v.samples().to_vec())
            .map_err(py_err)
    }

    #[getter]
    fn lattice(&self) -> PyLattice {
        PyLattice(self.0.lattice())
    }

    #[getter]
    fn real_type(&self) -> bool {
        self.0.real_type()
    }

    fn values(&self) -> Vec<Complex64> {
        self.0.values().to_vec()
    }

    fn __getitem__(&self, k: i64) -> Complex64 {
        self.0.get(k)
    }

    fn __len__(&self) -> usize {
        self.0.values().len()
    }

    fn __add__(&self, other: &PySequence) -> Self {
        Self(self.0.add(&other.0))
    }

    fn __sub__(&self, other: &PySequence) -> Self {
        Self(self.0.sub(&other.0))
    }

    fn __mul__(&self, a: f64) -> Self {
        Self(self.0.scale(a))
    }

    /// Weighted norm; `p` is `1`, `2` or `"inf"`.
    #[pyo3(signature = (s=0.0, p="2"))]
    fn norm(&self, s: f64, p: &str) -> PyResult<f64> {
        let spec = match p {
            "1" => NormSpec::l1(s),
            "2" => NormSpec::l2(s),
            "inf" => NormSpec::linf(s),
            other => return Err(PyValueError::new_err(format!("unknown norm exponent {other:?}"))),
        };
        Ok(self.0.norm(spec))
    }

    fn __repr__(&self) -> String {
        format!(
            "Sequence(n={}, real_type={}, l2={:.6e})",
            self.0.lattice().radius(),
            self.0.real_type(),
            self.0.norm(NormSpec::l2(0.0))
        )
    }
}

#[pyfunction]
#[pyo3(signature = (family, epsilon, rho, lattice, bandwidth=1, seed=0))]
fn make_data(family: &str, epsilon: f64, rho: f64, lattice: PyLattice, bandwidth: usize, seed: u64) -> PyResult<PySequence> {
    let family: DataFamily =
        serde_json::from_value(serde_json::Value::String(family.to_string())).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let spec = DataSpec {
        family,
        epsilon,
        rho,
        bandwidth,
        seed,
        lattice: lattice.0,
    };
    spec.validate().map_err(py_err)?;
    data::make_data(&spec).map(PySequence).map_err(py_err)
}

/// `(in_class, l2_ratio, l2_32_ratio)` for the class `X_ε^ρ`.
#[pyfunction]
fn membership(u: &PySequence, epsilon: f64, rho: f64) -> PyResult<(bool, f64, f64)> {
    let r = data::membership(&u.0, epsilon, rho).map_err(py_err)?;
    Ok((r.in_class, r.l2_ratio, r.l2_32_ratio))
}

#[pyfunction]
fn eval_hamiltonian(name: &str, q: &PySequence) -> PyResult<Complex64> {
    Ok(hamiltonians::eval_hamiltonian(&kind(name)?, &q.0))
}

#[pyfunction]
fn gradient(name: &str, q: &PySequence) -> PyResult<PySequence> {
    Ok(PySequence(hamiltonians::gradient(&kind(name)?, &q.0)))
}

#[pyfunction]
fn poisson_bracket(a: &str, b: &str, q: &PySequence) -> PyResult<Complex64> {
    Ok(hamiltonians::poisson_bracket(&kind(a)?, &kind(b)?, &q.0))
}

#[pyfunction]
#[pyo3(signature = (q, substeps=32))]
fn u_of_q(q: &PySequence, substeps: usize) -> PyResult<PySequence> {
    flows::u_of_q(&q.0, &FlowConfig::with_substeps(substeps))
        .map(PySequence)
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (u, substeps=32))]
fn q_of_u(u: &PySequence, substeps: usize) -> PyResult<PySequence> {
    flows::q_of_u(&u.0, &FlowConfig::with_substeps(substeps))
        .map(PySequence)
        .map_err(py_err)
}

/// Integrates to `t_final`; returns the final state and the diagnostics.
#[pyfunction]
#[pyo3(signature = (u0, dt, t_final, record_every=1, phase_step=None))]
fn evolve<'py>(
    py: Python<'py>,
    u0: &PySequence,
    dt: f64,
    t_final: f64,
    record_every: usize,
    phase_step: Option<f64>,
) -> PyResult<(PySequence, Bound<'py, PyAny>)> {
    let mut cfg = SolverConfig::new(dt, t_final, u0.0.lattice());
    cfg.record_every = record_every;
    cfg.phase_step = phase_step;
    cfg.validate().map_err(py_err)?;
    let traj = py.detach(|| solver::evolve(&u0.0, &cfg)).map_err(py_err)?;
    let last = PySequence(traj.last().u.clone());
    Ok((last, to_py_json(py, &traj.diagnostics)?))
}

/// Zero-mean soliton of parameter `kappa` at time `t`, as a weighted sequence.
#[pyfunction]
#[pyo3(signature = (kappa, t, lattice, x0=0.0))]
fn soliton(kappa: f64, t: f64, lattice: PyLattice, x0: f64) -> PyResult<PySequence> {
    let v = solver::soliton_zero_mean(kappa, t, x0, lattice.0).map_err(py_err)?;
    Ok(PySequence(spectral::weighted_from_physical(&v)))
}

#[pyfunction]
#[pyo3(signature = (n=8, trials=50, seed=1))]
fn check_identities<'py>(py: Python<'py>, n: usize, trials: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let report = py.detach(|| experiments::check_identities(n, trials, seed)).map_err(py_err)?;
    to_py_json(py, &report)
}

/// Runs `kind` ("theorem", "transform" or "error") on a JSON config;
/// returns the CSV text and the full report.
#[pyfunction]
fn scan<'py>(py: Python<'py>, kind: &str, config_json: &str) -> PyResult<(String, Bound<'py, PyAny>)> {
    let cfg = ScanConfig::from_json(config_json).map_err(py_err)?;
    let run = match kind {
        "theorem" => experiments::scan_linear_proximity,
        "transform" => experiments::scan_near_identity,
        "error" => experiments::scan_error_term,
        other => return Err(PyValueError::new_err(format!("unknown scan {other:?}"))),
    };
    let report = py.detach(|| run(&cfg)).map_err(py_err)?;
    Ok((report.to_csv(), to_py_json(py, &report)?))
}

/// Least-squares `log y = slope·log x + intercept`.
#[pyfunction]
fn slope_fit<'py>(py: Python<'py>, points: Vec<(f64, f64)>) -> PyResult<Bound<'py, PyAny>> {
    let fit = experiments::slope_fit(&points).map_err(py_err)?;
    to_py_json(py, &fit)
}

#[pymodule]
fn kdvlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLattice>()?;
    m.add_class::<PySequence>()?;
    m.add("InvalidConfigError", m.py().get_type::<InvalidConfigError>())?;
    m.add("DivergenceError", m.py().get_type::<DivergenceError>())?;
    m.add_function(wrap_pyfunction!(make_data, m)?)?;
    m.add_function(wrap_pyfunction!(membership, m)?)?;
    m.add_function(wrap_pyfunction!(eval_hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_bracket, m)?)?;
    m.add_function(wrap_pyfunction!(u_of_q, m)?)?;
    m.add_function(wrap_pyfunction!(q_of_u, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(soliton, m)?)?;
    m.add_function(wrap_pyfunction!(check_identities, m)?)?;
    m.add_function(wrap_pyfunction!(scan, m)?)?;
    m.add_function(wrap_pyfunction!(slope_fit, m)?)?;
    Ok(())
}
