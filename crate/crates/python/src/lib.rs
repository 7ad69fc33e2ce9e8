//! Python bindings for `qrecon`.
//!
//! Distributions and real states are plain lists of floats, complex states
//! and matrices are lists of Python `complex` values. Outcome indices are
//! 0-based.

use std::collections::BTreeMap;

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qrecon::bayes::{Collision, CoinExperiment as CoreCoin, EntropyFn, Shannon};
use qrecon::cli::{run as run_report, CliError, RunConfig, Subcommand};
use qrecon::distmax;
use qrecon::measurement::{self, Measurement as CoreMeasurement};
use qrecon::rng::substream;
use qrecon::simplex::{self, ProbDist as CoreProbDist, TangentVec};
use qrecon::statespace::{ComplexState, GaugeConvention, RealState};
use qrecon::transforms::{self, OrthogonalMap as CoreOrthogonalMap, TransformType, UnitaryMap};

fn py_err(e: qrecon::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dist(p: Vec<f64>) -> PyResult<CoreProbDist> {
    CoreProbDist::new(p).map_err(py_err)
}

fn cstate(v: Vec<Complex64>) -> PyResult<ComplexState> {
    ComplexState::new(v).map_err(py_err)
}

fn entropy(name: &str) -> PyResult<&'static dyn EntropyFn> {
    match name {
        "shannon" => Ok(&Shannon),
        "collision" => Ok(&Collision),
        other => Err(PyValueError::new_err(format!("unknown entropy {other:?}"))),
    }
}

fn rows_f64(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn rows_c64(m: &nalgebra::DMatrix<Complex64>) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn square<T: nalgebra::Scalar + Copy>(rows: Vec<Vec<T>>) -> PyResult<nalgebra::DMatrix<T>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    let flat: Vec<T> = rows.into_iter().flatten().collect();
    Ok(nalgebra::DMatrix::from_row_slice(n, n, &flat))
}

fn unitary(rows: Vec<Vec<Complex64>>) -> PyResult<UnitaryMap> {
    UnitaryMap::new(square(rows)?).map_err(py_err)
}

/// Validated probability distribution.
#[pyclass(module = "pyqrecon", frozen)]
struct ProbDist {
    inner: CoreProbDist,
}

#[pymethods]
impl ProbDist {
    #[new]
    fn new(probs: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: dist(probs)? })
    }

    #[staticmethod]
    fn renormalize(weights: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: CoreProbDist::renormalize(weights).map_err(py_err)?,
        })
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.inner.probs().to_vec()
    }

    fn statistical_distance(&self, other: PyRef<'_, ProbDist>) -> PyResult<f64> {
        simplex::statistical_distance(&self.inner, &other.inner).map_err(py_err)
    }

    fn kl_divergence(&self, other: PyRef<'_, ProbDist>) -> PyResult<f64> {
        simplex::kl_divergence(&self.inner, &other.inner).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("ProbDist({:?})", self.inner.probs())
    }
}

/// `¼ Σ dp_i² / p_i`.
#[pyfunction]
fn fisher_quadratic(p: Vec<f64>, dp: Vec<f64>) -> PyResult<f64> {
    let dp = TangentVec::new(dp).map_err(py_err)?;
    simplex::fisher_quadratic(&dist(p)?, &dp).map_err(py_err)
}

#[pyfunction]
fn statistical_distance(p: Vec<f64>, p2: Vec<f64>) -> PyResult<f64> {
    simplex::statistical_distance(&dist(p)?, &dist(p2)?).map_err(py_err)
}

#[pyfunction]
fn kl_divergence(p: Vec<f64>, p2: Vec<f64>) -> PyResult<f64> {
    simplex::kl_divergence(&dist(p)?, &dist(p2)?).map_err(py_err)
}

/// Two coins, `n` tosses of coin A, prior `prior_a` on A.
#[pyclass(module = "pyqrecon", frozen)]
struct CoinExperiment {
    inner: CoreCoin,
}

#[pymethods]
impl CoinExperiment {
    #[new]
    #[pyo3(signature = (p, p2, n, prior_a = 0.5))]
    fn new(p: Vec<f64>, p2: Vec<f64>, n: u64, prior_a: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreCoin::with_prior(dist(p)?, dist(p2)?, n, prior_a).map_err(py_err)?,
        })
    }

    /// `(post_a, post_b, log_ratio)` for observed counts.
    fn exact_posterior(&self, counts: Vec<u64>) -> PyResult<(f64, f64, f64)> {
        let r = self.inner.exact_posterior(&counts).map_err(py_err)?;
        Ok((r.post_a, r.post_b, r.log_ratio))
    }

    fn expected_log_ratio(&self) -> PyResult<f64> {
        self.inner.expected_log_ratio().map_err(py_err)
    }

    fn n_ds2(&self) -> PyResult<f64> {
        self.inner.n_ds2().map_err(py_err)
    }

    #[pyo3(signature = (entropy_name = "shannon"))]
    fn info_gain_exact(&self, entropy_name: &str) -> PyResult<f64> {
        self.inner.info_gain_exact(entropy(entropy_name)?).map_err(py_err)
    }

    fn info_gain_approx(&self) -> PyResult<f64> {
        self.inner.info_gain_approx().map_err(py_err)
    }

    /// `(mean, std_error)` of the entropy reduction over simulated datasets.
    #[pyo3(signature = (trials, seed, entropy_name = "shannon"))]
    fn monte_carlo_gain(&self, py: Python<'_>, trials: u64, seed: u64, entropy_name: &str) -> PyResult<(f64, f64)> {
        let u = entropy(entropy_name)?;
        let r = py
            .detach(|| self.inner.monte_carlo_gain(trials, seed, u))
            .map_err(py_err)?;
        Ok((r.mean, r.std_error))
    }

    #[pyo3(signature = (entropy_name = "shannon"))]
    fn expected_posterior_gain_binary(&self, entropy_name: &str) -> PyResult<f64> {
        self.inner
            .expected_posterior_gain_binary(entropy(entropy_name)?)
            .map_err(py_err)
    }
}

/// Real 2N×2N orthogonal matrix.
#[pyclass(module = "pyqrecon", frozen)]
struct OrthogonalMap {
    inner: CoreOrthogonalMap,
}

#[pymethods]
impl OrthogonalMap {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: CoreOrthogonalMap::new(square(rows)?).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn random(dim: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: transforms::random_orthogonal(dim, seed).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_unitary(u: Vec<Vec<Complex64>>) -> PyResult<Self> {
        Ok(Self {
            inner: transforms::from_unitary(&unitary(u)?).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_antiunitary(u: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let a = transforms::AntiunitaryMap::new(square(u)?).map_err(py_err)?;
        Ok(Self {
            inner: transforms::from_antiunitary(&a).map_err(py_err)?,
        })
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        rows_f64(self.inner.matrix())
    }

    /// `"type1"`, `"type2"` or `"neither"`.
    fn classify(&self) -> &'static str {
        transforms::classify(&self.inner).name()
    }

    /// Block parameters `(alpha, phi)` as row-major lists, or `None`.
    fn block_params(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match transforms::classify(&self.inner) {
            TransformType::Type1(p) | TransformType::Type2(p) => Some((p.alpha, p.phi)),
            TransformType::Neither { .. } => None,
        }
    }

    fn to_unitary(&self) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(rows_c64(transforms::to_unitary(&self.inner).map_err(py_err)?.matrix()))
    }

    fn to_antiunitary(&self) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(rows_c64(transforms::to_antiunitary(&self.inner).map_err(py_err)?.matrix()))
    }

    fn apply(&self, q: Vec<f64>) -> PyResult<Vec<f64>> {
        let q = RealState::new(q).map_err(py_err)?;
        Ok(self.inner.apply(&q).map_err(py_err)?.components().to_vec())
    }

    /// `(pass, max_deviation)` of the global gauge-shift probe.
    #[pyo3(signature = (seed, states = 32, shifts = 16))]
    fn gauge_probe(&self, seed: u64, states: usize, shifts: usize) -> PyResult<(bool, f64)> {
        let r = transforms::random_gauge_probe(&self.inner, &GaugeConvention::default(), states, shifts, seed)
            .map_err(py_err)?;
        Ok((r.pass, r.max_deviation))
    }

    fn to_json(&self) -> String {
        qrecon::report::to_json_string(&self.inner)
    }
}

#[pyfunction]
fn random_unitary(n: usize, seed: u64) -> PyResult<Vec<Vec<Complex64>>> {
    Ok(rows_c64(transforms::random_unitary(n, seed).map_err(py_err)?.matrix()))
}

/// Measurement with pre-interaction `u` and post-measurement phases.
#[pyclass(module = "pyqrecon", frozen)]
struct Measurement {
    inner: CoreMeasurement,
}

#[pymethods]
impl Measurement {
    #[new]
    #[pyo3(signature = (u, phases = None))]
    fn new(u: Vec<Vec<Complex64>>, phases: Option<Vec<f64>>) -> PyResult<Self> {
        let u = unitary(u)?;
        let inner = match phases {
            Some(ph) => CoreMeasurement::with_phases(u, ph).map_err(py_err)?,
            None => CoreMeasurement::new(u),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn standard(n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: CoreMeasurement::standard(n).map_err(py_err)?,
        })
    }

    fn basis_vector(&self, k: usize) -> PyResult<Vec<Complex64>> {
        Ok(self.inner.basis_vector(k).map_err(py_err)?.amplitudes().to_vec())
    }

    fn outcome_distribution(&self, v: Vec<Complex64>) -> PyResult<Vec<f64>> {
        Ok(measurement::outcome_distribution(&self.inner, &cstate(v)?)
            .map_err(py_err)?
            .into_vec())
    }

    /// `(outcome, probability, output_state)`.
    #[pyo3(signature = (v, forced = None, seed = 0))]
    fn apply(&self, v: Vec<Complex64>, forced: Option<usize>, seed: u64) -> PyResult<(usize, f64, Vec<Complex64>)> {
        let r = measurement::apply_measurement(&self.inner, &cstate(v)?, forced, &mut substream(seed, 0))
            .map_err(py_err)?;
        Ok((r.outcome, r.probability, r.output_state.amplitudes().to_vec()))
    }

    fn sample(&self, v: Vec<Complex64>, shots: u64, seed: u64) -> PyResult<Vec<u64>> {
        measurement::sample_outcomes(&self.inner, &cstate(v)?, shots, seed).map_err(py_err)
    }

    fn simulability_roundtrip(&self) -> PyResult<bool> {
        Ok(measurement::simulability_roundtrip(&self.inner).map_err(py_err)?.pass)
    }
}

#[pyfunction]
fn hilbert_distance(u: Vec<Complex64>, v: Vec<Complex64>) -> PyResult<f64> {
    distmax::hilbert_distance(&cstate(u)?, &cstate(v)?).map_err(py_err)
}

/// Dict with `max_ds`, `hilbert_distance`, `gap`, `best_restart`,
/// `evaluations` and the maximizing unitary `u`.
#[pyfunction]
#[pyo3(signature = (u, v, budget = 16, seed = 0))]
fn maximize_statistical_distance<'py>(
    py: Python<'py>,
    u: Vec<Complex64>,
    v: Vec<Complex64>,
    budget: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let (u, v) = (cstate(u)?, cstate(v)?);
    let r = py
        .detach(|| distmax::maximize_statistical_distance(&u, &v, budget, seed))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("max_ds", r.max_ds)?;
    d.set_item("hilbert_distance", r.hilbert_distance)?;
    d.set_item("gap", r.gap)?;
    d.set_item("best_restart", r.best_restart)?;
    d.set_item("evaluations", r.evaluations)?;
    d.set_item("u", rows_c64(r.argmax_measurement.u().matrix()))?;
    Ok(d)
}

#[pyfunction]
fn certify_upper_bound(py: Python<'_>, u: Vec<Complex64>, v: Vec<Complex64>, samples: usize, seed: u64) -> PyResult<f64> {
    let (u, v) = (cstate(u)?, cstate(v)?);
    py.detach(|| distmax::certify_upper_bound(&u, &v, samples, seed))
        .map_err(py_err)
}

/// Runs a verification subcommand and returns the JSON report.
#[pyfunction]
#[pyo3(signature = (subcommand, *, n = None, seed = None, trials = None, shots = None, budget = None, p = None, p2 = None, tol_overrides = None))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    subcommand: &str,
    n: Option<usize>,
    seed: Option<u64>,
    trials: Option<u64>,
    shots: Option<u64>,
    budget: Option<usize>,
    p: Option<Vec<f64>>,
    p2: Option<Vec<f64>>,
    tol_overrides: Option<BTreeMap<String, f64>>,
) -> PyResult<String> {
    let cmd = Subcommand::parse(subcommand)
        .ok_or_else(|| PyValueError::new_err(format!("unknown subcommand {subcommand:?}")))?;
    let mut cfg = RunConfig::new(cmd);
    cfg.n = n.or(p.as_ref().map(Vec::len)).unwrap_or(cfg.n);
    cfg.seed = seed;
    cfg.trials = trials;
    if let Some(s) = shots {
        cfg.shots = s;
    }
    if let Some(b) = budget {
        cfg.budget = b;
    }
    cfg.p = p;
    cfg.p2 = p2;
    cfg.tol_overrides = tol_overrides.unwrap_or_default();
    let report = py.detach(|| run_report(&cfg)).map_err(|e| match e {
        CliError::Config(msg) => PyValueError::new_err(msg),
        CliError::Io(e) => PyErr::from(e),
    })?;
    Ok(report.to_json_string())
}

#[pymodule]
fn pyqrecon(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ProbDist>()?;
    m.add_class::<CoinExperiment>()?;
    m.add_class::<OrthogonalMap>()?;
    m.add_class::<Measurement>()?;
    m.add_function(wrap_pyfunction!(fisher_quadratic, m)?)?;
    m.add_function(wrap_pyfunction!(statistical_distance, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(random_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(hilbert_distance, m)?)?;
    m.add_function(wrap_pyfunction!(maximize_statistical_distance, m)?)?;
    m.add_function(wrap_pyfunction!(certify_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
