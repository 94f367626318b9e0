//! Python bindings: `import cournot_chain`.
//!
//! Results come back as plain dicts with the same field names as the
//! `cournot-chain` JSON output.

use cournot_core::bayes::{self, BayesError, BayesProblem};
use cournot_core::distributions::{self, BeliefError};
use cournot_core::second_stage::{self, MarketError};
use cournot_core::{first_stage, inefficiency as ineff, oracle};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};
use serde::Serialize;
use serde_json::Value;

create_exception!(cournot_chain, CournotError, PyValueError, "Invalid market, belief or parameter.");
create_exception!(cournot_chain, TrivialMarketError, CournotError, "r_H <= 0: every margin is optimal.");
create_exception!(cournot_chain, NoMaximizerError, CournotError, "Expected payoff has no maximizer.");

fn belief_err(e: BeliefError) -> PyErr {
    CournotError::new_err(e.to_string())
}

fn market_err(e: MarketError) -> PyErr {
    CournotError::new_err(e.to_string())
}

fn bayes_err(e: BayesError) -> PyErr {
    match e {
        BayesError::Trivial { .. } => TrivialMarketError::new_err(e.to_string()),
        BayesError::NoMaximizer { .. } => NoMaximizerError::new_err(e.to_string()),
        other => CournotError::new_err(other.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let items = items.iter().map(|x| json_to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(map) => {
            let d = PyDict::new(py);
            for (k, x) in map {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| CournotError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// Belief about the demand intercept α.
#[pyclass(name = "DemandBelief", module = "cournot_chain", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyBelief(distributions::DemandBelief);

#[pymethods]
impl PyBelief {
    #[staticmethod]
    fn uniform(low: f64, high: f64) -> PyResult<Self> {
        distributions::DemandBelief::uniform(low, high).map(Self).map_err(belief_err)
    }

    #[staticmethod]
    fn exponential(rate: f64) -> PyResult<Self> {
        distributions::DemandBelief::exponential(rate).map(Self).map_err(belief_err)
    }

    #[staticmethod]
    fn beta_one_lambda(lam: f64) -> PyResult<Self> {
        distributions::DemandBelief::beta_one_lambda(lam).map(Self).map_err(belief_err)
    }

    #[staticmethod]
    fn pareto(scale: f64, shape: f64) -> PyResult<Self> {
        distributions::DemandBelief::pareto(scale, shape).map(Self).map_err(belief_err)
    }

    #[staticmethod]
    fn two_interval_uniform(a1: f64, b1: f64, a2: f64, b2: f64) -> PyResult<Self> {
        distributions::DemandBelief::two_interval_uniform(a1, b1, a2, b2).map(Self).map_err(belief_err)
    }

    /// Continuous cdf through `(x, F(x))` knots.
    #[staticmethod]
    fn piecewise_linear(knots: Vec<(f64, f64)>) -> PyResult<Self> {
        distributions::DemandBelief::piecewise_linear(knots).map(Self).map_err(belief_err)
    }

    /// Parse the JSON form used in config files.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Self).map_err(|e| CournotError::new_err(e.to_string()))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| CournotError::new_err(e.to_string()))
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean()
    }

    /// `(low, high)`; `high` may be `inf`.
    #[getter]
    fn support(&self) -> (f64, f64) {
        (self.0.support_low(), self.0.support_high())
    }

    fn cdf(&self, t: f64) -> f64 {
        self.0.cdf(t)
    }

    fn survival(&self, t: f64) -> f64 {
        self.0.survival(t)
    }

    fn partial_expectation(&self, t: f64) -> f64 {
        self.0.partial_expectation(t)
    }

    fn mrl(&self, t: f64) -> f64 {
        self.0.mrl(t)
    }

    fn density(&self, t: f64) -> f64 {
        self.0.density(t)
    }

    fn hazard(&self, t: f64) -> f64 {
        self.0.hazard(t)
    }

    fn quantile(&self, p: f64) -> f64 {
        self.0.quantile(p)
    }

    fn inverse_survival(&self, s: f64) -> f64 {
        self.0.inverse_survival(s)
    }

    fn is_dmrl(&self) -> bool {
        self.0.is_dmrl().is_dmrl()
    }

    fn __repr__(&self) -> String {
        format!("DemandBelief({})", self.to_json().unwrap_or_default())
    }
}

fn market(t1: f64, t2: Option<f64>, c: f64, n: u32) -> PyResult<second_stage::MarketParams> {
    let t2 = t2.unwrap_or(t1);
    let params = second_stage::MarketParams { t1, t2, c, n };
    params.validate().map_err(market_err)?;
    Ok(params)
}

fn problem(belief: &PyBelief, t: f64, c: f64, n: u32) -> PyResult<BayesProblem> {
    BayesProblem::new(belief.0.clone(), t, c, n).map_err(bayes_err)
}

/// Retailer equilibrium for a known α and wholesale price `w`.
#[pyfunction]
#[pyo3(signature = (alpha, w, t1, t2=None, n=2))]
fn retailer_equilibrium(py: Python<'_>, alpha: f64, w: f64, t1: f64, t2: Option<f64>, n: u32) -> PyResult<Bound<'_, PyAny>> {
    let params = market(t1, t2, 0.0, n)?;
    to_py(py, &second_stage::equilibrium(alpha, w, &params).map_err(market_err)?)
}

/// Supplier's subgame-perfect margin when α is known.
#[pyfunction]
#[pyo3(signature = (alpha, t1, c, t2=None, n=2))]
fn optimal_margin(py: Python<'_>, alpha: f64, t1: f64, c: f64, t2: Option<f64>, n: u32) -> PyResult<Bound<'_, PyAny>> {
    let params = market(t1, t2, c, n)?;
    to_py(py, &first_stage::optimal_margin_general(alpha, &params).map_err(market_err)?)
}

/// Supplier's margin under a belief about α.
///
/// Raises `TrivialMarketError` when no margin earns anything and
/// `NoMaximizerError` when the expected payoff keeps rising.
#[pyfunction]
#[pyo3(signature = (belief, t, c, n=2))]
fn solve_equilibrium<'py>(py: Python<'py>, belief: &PyBelief, t: f64, c: f64, n: u32) -> PyResult<Bound<'py, PyAny>> {
    let p = problem(belief, t, c, n)?;
    to_py(py, &bayes::solve_equilibrium(&p).map_err(bayes_err)?)
}

#[pyfunction]
#[pyo3(signature = (belief, t, c, r, n=2))]
fn expected_payoff(belief: &PyBelief, t: f64, c: f64, r: f64, n: u32) -> PyResult<f64> {
    Ok(problem(belief, t, c, n)?.expected_payoff(r))
}

#[pyfunction]
#[pyo3(signature = (belief, t, c, r, n=2))]
fn payoff_derivative(belief: &PyBelief, t: f64, c: f64, r: f64, n: u32) -> PyResult<f64> {
    problem(belief, t, c, n)?.payoff_derivative(r).map_err(bayes_err)
}

/// Lost-trade probabilities at the Bayesian equilibrium.
#[pyfunction]
#[pyo3(signature = (belief, t, c, n=2))]
fn inefficiency<'py>(py: Python<'py>, belief: &PyBelief, t: f64, c: f64, n: u32) -> PyResult<Bound<'py, PyAny>> {
    let p = problem(belief, t, c, n)?;
    let s = bayes::solve_equilibrium(&p).map_err(bayes_err)?;
    to_py(py, &ineff::inefficiency(&p, &s))
}

/// `1 - 1/e`.
#[pyfunction]
fn dmrl_bound() -> f64 {
    ineff::dmrl_bound()
}

/// Seeded Monte Carlo estimate of the expected payoff: `(estimate, std_error)`.
#[pyfunction]
#[pyo3(signature = (belief, t, c, r, n=2, samples=1_000_000, seed=0))]
fn mc_expected_payoff(belief: &PyBelief, t: f64, c: f64, r: f64, n: u32, samples: usize, seed: u64) -> (f64, f64) {
    let cfg = oracle::OracleConfig::default().with_samples(samples).with_seed(seed);
    let est = oracle::mc_expected_payoff(&belief.0, t, c, n, r, &cfg);
    (est.estimate, est.std_error)
}

#[pymodule]
fn cournot_chain(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<PyBelief>()?;
    m.add_function(wrap_pyfunction!(retailer_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_margin, m)?)?;
    m.add_function(wrap_pyfunction!(solve_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(expected_payoff, m)?)?;
    m.add_function(wrap_pyfunction!(payoff_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(inefficiency, m)?)?;
    m.add_function(wrap_pyfunction!(dmrl_bound, m)?)?;
    m.add_function(wrap_pyfunction!(mc_expected_payoff, m)?)?;
    m.add("CournotError", py.get_type::<CournotError>())?;
    m.add("TrivialMarketError", py.get_type::<TrivialMarketError>())?;
    m.add("NoMaximizerError", py.get_type::<NoMaximizerError>())?;
    Ok(())
}
