//! Python bindings. Reports cross the boundary as JSON text.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::takagi_lab as core;
use core::cli::{execute, RunConfig};
use core::limits::{clt_experiment, functional_clt_experiment, modulus_experiment, Normalization};

fn err(e: core::Error) -> PyErr {
    match e {
        core::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Accepts `"p/q"`, `"r^-m"`, a decimal string or a float.
fn point(x: &Bound<'_, PyAny>) -> PyResult<core::TorusPoint> {
    if let Ok(s) = x.extract::<String>() {
        return s.parse().map_err(err);
    }
    core::TorusPoint::from_f64(x.extract::<f64>()?).map_err(err)
}

fn sequence(w: &Bound<'_, PyAny>) -> PyResult<core::WeightSequence> {
    if let Ok(seq) = w.cast::<WeightSequence>() {
        return Ok(seq.borrow().inner.clone());
    }
    let spec: String = w.extract()?;
    core::WeightSequence::new(spec.parse().map_err(err)?).map_err(err)
}

#[pyclass(frozen, module = "takagi_lab")]
struct WeightSequence {
    inner: core::WeightSequence,
}

#[pymethods]
impl WeightSequence {
    /// `spec`: `const`, `power:0.5`, `alternating`, `odd`, `geometric:2`,
    /// `explicit:1,0,1` or the JSON form.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Self { inner: core::WeightSequence::new(spec.parse().map_err(err)?).map_err(err)? })
    }

    fn weight(&self, k: usize) -> PyResult<f64> {
        if k == 0 {
            return Err(PyValueError::new_err("indices start at 1"));
        }
        Ok(self.inner.weight(k))
    }

    fn values(&self, n: usize) -> Vec<f64> {
        self.inner.values(n)
    }

    fn partial_energy(&self, n: usize) -> f64 {
        self.inner.partial_energy(n)
    }

    fn energies(&self, n: usize) -> Vec<f64> {
        self.inner.energies(n)
    }

    fn validate_assumptions<'py>(&self, py: Python<'py>, delta: f64, n_max: usize) -> PyResult<Bound<'py, PyDict>> {
        let r = self.inner.validate_assumptions(delta, n_max).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("k_hat", r.k_hat)?;
        d.set_item("worst_index", r.worst_index)?;
        d.set_item("trailing_slope", r.trailing_slope)?;
        d.set_item("pass", r.pass)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("WeightSequence('{}')", self.inner.kind())
    }
}

#[pyclass(frozen, module = "takagi_lab")]
struct FractalFunction {
    inner: core::FractalFunction,
}

#[pymethods]
impl FractalFunction {
    #[new]
    #[pyo3(signature = (r, weights = None))]
    fn new(r: u32, weights: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let seq = match weights {
            Some(w) => sequence(w)?,
            None => core::WeightSequence::constant(),
        };
        Ok(Self { inner: core::FractalFunction::new(r, seq).map_err(err)? })
    }

    #[getter]
    fn base(&self) -> u32 {
        self.inner.base()
    }

    #[getter]
    fn memory_parameter(&self) -> f64 {
        self.inner.memory_parameter()
    }

    /// `(value, certified_error, terms)`.
    #[pyo3(signature = (x, eps = 1e-12))]
    fn eval(&self, x: &Bound<'_, PyAny>, eps: f64) -> PyResult<(f64, f64, usize)> {
        let e = self.inner.eval(&point(x)?, eps).map_err(err)?;
        Ok((e.value, e.certified_error, e.terms))
    }

    fn sign_walk(&self, x: &Bound<'_, PyAny>, n: usize) -> PyResult<Vec<i8>> {
        Ok(self.inner.sign_walk(&point(x)?, n))
    }

    fn weighted_walk(&self, x: &Bound<'_, PyAny>, n: usize) -> PyResult<f64> {
        Ok(self.inner.weighted_walk(&point(x)?, n))
    }

    #[pyo3(signature = (x, h, eps = 1e-12))]
    fn decompose_increment<'py>(
        &self,
        py: Python<'py>,
        x: &Bound<'_, PyAny>,
        h: &Bound<'_, PyAny>,
        eps: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let d = self.inner.decompose_increment(&point(x)?, &point(h)?, eps).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("m", d.m)?;
        out.set_item("k0", d.k0)?;
        out.set_item("k0_hat", d.k0_hat)?;
        out.set_item("linear", d.linear)?;
        out.set_item("midrange", d.midrange)?;
        out.set_item("tail", d.tail)?;
        out.set_item("increment", d.increment)?;
        out.set_item("residual", d.residual)?;
        Ok(out)
    }
}

#[pyclass(frozen, module = "takagi_lab")]
struct ErwvrpParams {
    inner: core::ErwvrpParams,
}

#[pymethods]
impl ErwvrpParams {
    #[new]
    #[pyo3(signature = (p, weights = None, horizon = 1000))]
    fn new(p: f64, weights: Option<&Bound<'_, PyAny>>, horizon: usize) -> PyResult<Self> {
        let seq = match weights {
            Some(w) => sequence(w)?,
            None => core::WeightSequence::constant(),
        };
        Ok(Self { inner: core::ErwvrpParams::new(p, seq, horizon).map_err(err)? })
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    /// `(signs X_1..X_n, sums S_0..S_n)` for replica `stream`.
    #[pyo3(signature = (seed, stream = 0))]
    fn simulate(&self, seed: u64, stream: u64) -> (Vec<i8>, Vec<f64>) {
        let path = self.inner.simulate(seed, stream);
        (path.signs, path.sums)
    }

    /// `E[(S_n - S_m)^2]`.
    fn second_moment(&self, m: usize, n: usize) -> PyResult<f64> {
        self.inner.second_moment(m, n).map_err(err)
    }

    fn cumulative_variances(&self, n: usize) -> Vec<f64> {
        self.inner.cumulative_variances(n)
    }
}

#[pyfunction]
fn k_of_p(p: f64) -> PyResult<f64> {
    core::erwvrp::k_of_p(p).map_err(err)
}

#[pyfunction]
fn phi_mixing(p: f64, m: usize) -> PyResult<f64> {
    core::erwvrp::phi_mixing(p, m).map_err(err)
}

/// Boundaries `h_1, ..., h_{count}`.
#[pyfunction]
fn build_blocks(weights: &Bound<'_, PyAny>, delta: f64, count: usize) -> PyResult<Vec<usize>> {
    Ok(core::build_blocks(&sequence(weights)?, delta, count).map_err(err)?.boundaries)
}

/// `V_0, ..., V_{n_max}`.
#[pyfunction]
fn variance_profile(r: u32, weights: &Bound<'_, PyAny>, n_max: usize) -> PyResult<Vec<f64>> {
    Ok(core::limits::variance_profile(r, &sequence(weights)?, n_max).map_err(err)?.values)
}

#[pyfunction]
fn clt(params: &ErwvrpParams, n: usize, replicas: usize, seed: u64) -> PyResult<String> {
    Ok(clt_experiment(&params.inner, n, replicas, seed).map_err(err)?.to_json())
}

#[pyfunction]
#[pyo3(signature = (r, weights, levels, samples, seed))]
fn modulus(r: u32, weights: &Bound<'_, PyAny>, levels: Vec<u32>, samples: usize, seed: u64) -> PyResult<String> {
    let seq = sequence(weights)?;
    let top = *levels.iter().max().ok_or_else(|| PyValueError::new_err("empty levels"))?;
    let profile = core::limits::variance_profile(r, &seq, top as usize).map_err(err)?;
    let grid = levels
        .iter()
        .map(|&m| core::TorusPoint::inverse_power(r, m))
        .collect::<core::Result<Vec<_>>>()
        .map_err(err)?;
    let f = core::FractalFunction::new(r, seq).map_err(err)?;
    Ok(modulus_experiment(&f, &profile, &grid, samples, seed).map_err(err)?.to_json())
}

#[pyfunction]
#[pyo3(signature = (r, weights, n, t, samples, seed, beta = 1.0))]
fn functional_clt(
    r: u32,
    weights: &Bound<'_, PyAny>,
    n: usize,
    t: Vec<f64>,
    samples: usize,
    seed: u64,
    beta: f64,
) -> PyResult<String> {
    let seq = sequence(weights)?;
    let profile = core::limits::variance_profile(r, &seq, n).map_err(err)?;
    let f = core::FractalFunction::new(r, seq).map_err(err)?;
    Ok(functional_clt_experiment(&f, &profile, beta, n, &t, samples, seed).map_err(err)?.to_json())
}

/// Normalization names accepted by the LIL experiment.
#[pyfunction]
fn normalizations() -> Vec<String> {
    [Normalization::ExactVariance, Normalization::ScaledEnergy, Normalization::Energy]
        .iter()
        .map(|n| n.to_string())
        .collect()
}

/// Canonical form of a `key=value` run config.
#[pyfunction]
fn canonical_config(text: &str) -> PyResult<String> {
    Ok(RunConfig::parse(text).map_err(err)?.canonical())
}

/// Runs a `key=value` config without writing files; returns the report JSON.
#[pyfunction]
fn run_config(py: Python<'_>, text: &str) -> PyResult<String> {
    let cfg = RunConfig::parse(text).map_err(err)?;
    let (report, _) = py.detach(|| execute(&cfg)).map_err(err)?;
    Ok(report.to_json())
}

#[pymodule]
#[pyo3(name = "takagi_lab")]
pub fn takagi_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<WeightSequence>()?;
    m.add_class::<FractalFunction>()?;
    m.add_class::<ErwvrpParams>()?;
    m.add_function(wrap_pyfunction!(k_of_p, m)?)?;
    m.add_function(wrap_pyfunction!(phi_mixing, m)?)?;
    m.add_function(wrap_pyfunction!(build_blocks, m)?)?;
    m.add_function(wrap_pyfunction!(variance_profile, m)?)?;
    m.add_function(wrap_pyfunction!(clt, m)?)?;
    m.add_function(wrap_pyfunction!(modulus, m)?)?;
    m.add_function(wrap_pyfunction!(functional_clt, m)?)?;
    m.add_function(wrap_pyfunction!(normalizations, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
