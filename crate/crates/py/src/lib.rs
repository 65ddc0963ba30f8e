//! Python bindings: `import bdchain`.
//!
//! Exact quantities come back as `fractions.Fraction`, floating ones as `float`,
//! and `+inf` limits as `math.inf`.

use bdchain_core::analytics::{self, ExtinctionProbability, TailKind};
use bdchain_core::montecarlo::{self, SimOptions, StoppingRule};
use bdchain_core::oracle::{self, TruncatedChainModel};
use bdchain_core::{cli, spec_io, ChainSpec, ExtendedValue, Number, ProbPair, Scalar};
use num_rational::BigRational;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyFloat, PyString};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, value: &Number) -> PyResult<Py<PyAny>> {
    match value {
        Number::Exact(_) => {
            let fraction = py.import("fractions")?.getattr("Fraction")?;
            Ok(fraction.call1((value.to_string(),))?.unbind())
        }
        Number::Float(x) => Ok(PyFloat::new(py, *x).into_any().unbind()),
    }
}

fn scalar_to_py<S: Scalar>(py: Python<'_>, value: &S) -> PyResult<Py<PyAny>> {
    to_py(py, &value.to_number())
}

fn extended_to_py<S: Scalar>(py: Python<'_>, value: &ExtendedValue<S>) -> PyResult<Py<PyAny>> {
    match value {
        ExtendedValue::Finite(v) => scalar_to_py(py, v),
        ExtendedValue::PosInfinity => Ok(PyFloat::new(py, f64::INFINITY).into_any().unbind()),
    }
}

/// Accepts `"a/b"` strings, ints and `Fraction`s as exact values, floats as doubles.
fn number_arg(obj: &Bound<'_, PyAny>) -> PyResult<Number> {
    if let Ok(s) = obj.cast::<PyString>() {
        return s.to_str()?.parse::<Number>().map_err(value_error);
    }
    if obj.is_instance_of::<PyFloat>() {
        return Ok(Number::Float(obj.extract::<f64>()?));
    }
    if obj.hasattr("numerator")? && obj.hasattr("denominator")? {
        let text = format!("{}/{}", obj.getattr("numerator")?.str()?, obj.getattr("denominator")?.str()?);
        return text.parse::<Number>().map_err(value_error);
    }
    Err(PyValueError::new_err("expected a str like \"2/3\", a Fraction, an int or a float"))
}

/// A birth-death chain absorbed at 0, started at `k`.
#[pyclass(name = "Chain", module = "bdchain", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyChain {
    inner: ChainSpec,
}

#[pymethods]
impl PyChain {
    /// Parses a JSON chain spec.
    #[staticmethod]
    fn from_json(document: &str) -> PyResult<Self> {
        let inner = spec_io::parse_spec(document).map_err(value_error)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn simple_symmetric(k: u64) -> PyResult<Self> {
        Ok(Self { inner: ChainSpec::simple_symmetric(k).map_err(value_error)? })
    }

    /// `p` is the probability of stepping right.
    #[staticmethod]
    fn constant_drift(p: &Bound<'_, PyAny>, k: u64) -> PyResult<Self> {
        Ok(Self { inner: ChainSpec::constant_drift(number_arg(p)?, k).map_err(value_error)? })
    }

    #[staticmethod]
    fn example1(k: u64) -> PyResult<Self> {
        Ok(Self { inner: ChainSpec::example1(k).map_err(value_error)? })
    }

    #[staticmethod]
    fn example1_mirrored(k: u64) -> PyResult<Self> {
        Ok(Self { inner: ChainSpec::example1_mirrored(k).map_err(value_error)? })
    }

    /// `prefix` is a list of `(l_n, r_n)` pairs; symmetric steps follow.
    #[staticmethod]
    fn eventually_constant(prefix: Vec<(Bound<'_, PyAny>, Bound<'_, PyAny>)>, k: u64) -> PyResult<Self> {
        let pairs = prefix
            .iter()
            .map(|(l, r)| Ok(ProbPair::new(number_arg(l)?, number_arg(r)?)))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self { inner: ChainSpec::eventually_constant(pairs, k).map_err(value_error)? })
    }

    #[getter]
    fn start_state(&self) -> u64 {
        self.inner.start_state()
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family().tag()
    }

    #[getter]
    fn is_exact(&self) -> bool {
        self.inner.is_exact()
    }

    /// `(l_n, r_n)` for `n >= 1`.
    fn probs(&self, py: Python<'_>, n: u64) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
        let pair = self.inner.probs_at(n).map_err(value_error)?;
        Ok((to_py(py, &pair.left)?, to_py(py, &pair.right)?))
    }

    /// Same chain started elsewhere.
    fn with_start(&self, k: u64) -> PyResult<Self> {
        Ok(Self { inner: self.inner.with_start(k).map_err(value_error)? })
    }

    fn to_json(&self) -> String {
        spec_io::spec_to_json(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Chain({})", spec_io::spec_to_json(&self.inner))
    }
}

type Columns = (Vec<Py<PyAny>>, Vec<Py<PyAny>>);

/// `(t[0..=n], x[0..=n+1])`.
#[pyfunction]
fn ratio_table(py: Python<'_>, chain: &PyChain, n: u64) -> PyResult<Columns> {
    fn build<S: Scalar>(py: Python<'_>, spec: &ChainSpec, n: u64) -> PyResult<Columns> {
        let (t, x) = analytics::ratio_sequences::<S>(spec, n).map_err(value_error)?;
        let convert = |v: &[S]| v.iter().map(|s| scalar_to_py(py, s)).collect::<PyResult<Vec<_>>>();
        Ok((convert(&t)?, convert(&x)?))
    }
    if chain.inner.is_exact() {
        build::<BigRational>(py, &chain.inner, n)
    } else {
        build::<f64>(py, &chain.inner, n)
    }
}

/// `("positive-finite" | "zero" | "infinite" | "undetermined", limit or None, evidence)`.
#[pyfunction]
#[pyo3(signature = (chain, horizon = analytics::DEFAULT_HORIZON))]
fn tail_class(py: Python<'_>, chain: &PyChain, horizon: u64) -> PyResult<(&'static str, Option<Py<PyAny>>, String)> {
    let class = analytics::classify_tail(&chain.inner, analytics::DEFAULT_TAIL_TOLERANCE, horizon);
    let (name, limit) = match &class.kind {
        TailKind::PositiveFinite(v) => ("positive-finite", Some(to_py(py, v)?)),
        TailKind::Zero => ("zero", None),
        TailKind::Infinite => ("infinite", None),
        TailKind::Undetermined => ("undetermined", None),
    };
    Ok((name, limit, class.evidence))
}

/// Probability of ever hitting 0; raises when the series test is inconclusive.
#[pyfunction]
#[pyo3(signature = (chain, horizon = analytics::DEFAULT_HORIZON))]
fn extinction_probability(py: Python<'_>, chain: &PyChain, horizon: u64) -> PyResult<Py<PyAny>> {
    match analytics::extinction_probability(&chain.inner, horizon, analytics::DEFAULT_TAIL_TOLERANCE) {
        ExtinctionProbability::ClosedForm { value, .. } => to_py(py, &value),
        ExtinctionProbability::Series { value, .. } => Ok(PyFloat::new(py, value).into_any().unbind()),
        ExtinctionProbability::Inconclusive(reason) => Err(PyRuntimeError::new_err(reason)),
    }
}

/// `(P(exit at a), P(exit at b))` from `start`.
#[pyfunction]
fn exit_probabilities(py: Python<'_>, chain: &PyChain, a: u64, start: u64, b: u64) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
    fn build<S: Scalar>(
        py: Python<'_>,
        spec: &ChainSpec,
        a: u64,
        start: u64,
        b: u64,
    ) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
        let (low, high) = analytics::exit_probabilities::<S>(spec, a, start, b).map_err(value_error)?;
        Ok((scalar_to_py(py, &low)?, scalar_to_py(py, &high)?))
    }
    if chain.inner.is_exact() {
        build::<BigRational>(py, &chain.inner, a, start, b)
    } else {
        build::<f64>(py, &chain.inner, a, start, b)
    }
}

/// Expected visits to `n` before extinction, for chains that die out surely.
#[pyfunction]
fn occupation_until_extinction(py: Python<'_>, chain: &PyChain, n: u64) -> PyResult<Py<PyAny>> {
    if chain.inner.is_exact() {
        let v: BigRational = analytics::occupation_until_extinction(&chain.inner, n).map_err(value_error)?;
        scalar_to_py(py, &v)
    } else {
        let v: f64 = analytics::occupation_until_extinction(&chain.inner, n).map_err(value_error)?;
        scalar_to_py(py, &v)
    }
}

/// Limit of the stopped expectation along non-decreasing stopping times.
#[pyfunction]
fn limit_expectation(py: Python<'_>, chain: &PyChain) -> PyResult<Py<PyAny>> {
    if chain.inner.is_exact() {
        extended_to_py(py, &analytics::limit_expectation::<BigRational>(&chain.inner).map_err(value_error)?)
    } else {
        extended_to_py(py, &analytics::limit_expectation::<f64>(&chain.inner).map_err(value_error)?)
    }
}

/// `(verdict, partial_sum, evidence)` for the summability of `|1 - l_n/r_n|`.
#[pyfunction]
#[pyo3(signature = (chain, horizon = analytics::DEFAULT_HORIZON))]
fn criterion(chain: &PyChain, horizon: u64) -> PyResult<(String, f64, String)> {
    let report = analytics::convergence_criterion(&chain.inner, horizon).map_err(value_error)?;
    Ok((report.verdict.to_string(), report.partial_sum, report.evidence))
}

/// Oracle: exit probabilities of the chain truncated (absorbing) at `level`.
#[pyfunction]
fn oracle_exit_probabilities(
    py: Python<'_>,
    chain: &PyChain,
    level: usize,
    start: usize,
) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
    fn build<S: Scalar>(
        py: Python<'_>,
        spec: &ChainSpec,
        level: usize,
        start: usize,
    ) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
        let model = TruncatedChainModel::<S>::from_spec(spec, level).map_err(value_error)?;
        let (low, high) = oracle::exit_probs_by_recursion(&model, start).map_err(value_error)?;
        Ok((scalar_to_py(py, &low)?, scalar_to_py(py, &high)?))
    }
    if chain.inner.is_exact() {
        build::<BigRational>(py, &chain.inner, level, start)
    } else {
        build::<f64>(py, &chain.inner, level, start)
    }
}

/// Oracle: `E[X_(m ∧ T_D)]` by forward evolution of the distribution.
#[pyfunction]
#[pyo3(signature = (chain, m, exact = false))]
fn evolve_expectation(py: Python<'_>, chain: &PyChain, m: u64, exact: bool) -> PyResult<Py<PyAny>> {
    fn build<S: Scalar>(py: Python<'_>, spec: &ChainSpec, m: u64) -> PyResult<Py<PyAny>> {
        let k = spec.start_state();
        let model = TruncatedChainModel::<S>::from_spec(spec, oracle::non_binding_level(k, m)).map_err(value_error)?;
        let evolution = oracle::evolve_distribution(&model, k as usize, m).map_err(value_error)?;
        scalar_to_py(py, &oracle::expected_value_of(&evolution.distribution))
    }
    if exact && chain.inner.is_exact() {
        build::<BigRational>(py, &chain.inner, m)
    } else {
        build::<f64>(py, &chain.inner, m)
    }
}

/// Monte Carlo `E[X_(m ∧ T_D)]`: `(mean, 95% half-width, paths used)`.
#[pyfunction]
#[pyo3(signature = (chain, m, paths = 10_000, seed = cli::DEFAULT_SEED, workers = 1))]
fn simulate(
    py: Python<'_>,
    chain: &PyChain,
    m: u64,
    paths: u64,
    seed: u64,
    workers: usize,
) -> PyResult<(f64, f64, u64)> {
    let spec = chain.inner.clone();
    let options = SimOptions { workers, ..SimOptions::default() };
    let est = py
        .detach(move || montecarlo::estimate_expectation(&spec, StoppingRule::Truncation { m }, paths, seed, options))
        .map_err(value_error)?;
    Ok((est.mean, est.half_width_95, est.paths))
}

/// Runs the `bdchain` command line with `args` (without the program name); returns the exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    cli::run(std::iter::once("bdchain".to_string()).chain(args))
}

#[pymodule]
fn bdchain(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChain>()?;
    m.add_function(wrap_pyfunction!(ratio_table, m)?)?;
    m.add_function(wrap_pyfunction!(tail_class, m)?)?;
    m.add_function(wrap_pyfunction!(extinction_probability, m)?)?;
    m.add_function(wrap_pyfunction!(exit_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(occupation_until_extinction, m)?)?;
    m.add_function(wrap_pyfunction!(limit_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(criterion, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_exit_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
