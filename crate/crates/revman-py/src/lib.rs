//! Python bindings for the episodic revenue-management simulator.
//!
//! Exposes the demand environments, the fluid LP, the DP oracle, trial
//! execution, and regret aggregation. Randomized operations take explicit
//! seeds and are bit-reproducible. Build with
//! `cargo build -p revman-py --release` and import the produced cdylib as
//! `revman_py` (see `python/smoke_test.py`).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use revman::demand::{Action, DemandEnvironment, EnvironmentSpec, MeanDemandMatrix, PriceGrid};
use revman::dp::{solve_dp as dp_solve, ValueTable};
use revman::harness::{expand_preset, PriorChoice};
use revman::policies::PolicyKind;
use revman::posterior::PriorSpec;
use revman::regret::relative_regret_curve as curve;
use revman::sim::{run_trial as sim_run_trial, trial_seed, TrialResult};

fn to_py_err(e: revman::Error) -> PyErr {
    match e {
        revman::Error::InvalidArgument(_) | revman::Error::Config(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn matrix_rows(m: &MeanDemandMatrix) -> Vec<Vec<f64>> {
    (0..m.horizon()).map(|t| m.row(t).to_vec()).collect()
}

fn matrix_from_rows(rows: Vec<Vec<f64>>) -> PyResult<MeanDemandMatrix> {
    let horizon = rows.len();
    let k = rows.first().map_or(0, |r| r.len());
    let mut values = Vec::with_capacity(horizon * k);
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() != k {
            return Err(PyValueError::new_err(format!(
                "lambda row {i} has {} entries, expected {k}",
                row.len()
            )));
        }
        values.extend(row);
    }
    MeanDemandMatrix::new(horizon, k, values).map_err(to_py_err)
}

/// A true demand environment over a (period, price) grid.
#[pyclass(name = "Environment")]
struct PyEnvironment {
    inner: DemandEnvironment,
}

#[pymethods]
impl PyEnvironment {
    /// Load from the JSON environment schema.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let env = EnvironmentSpec::from_json(text)
            .and_then(|spec| spec.to_environment())
            .map_err(to_py_err)?;
        Ok(PyEnvironment { inner: env })
    }

    /// The environment behind a named experiment preset (A1, B2, NB-A1, ...).
    #[staticmethod]
    fn preset(name: &str) -> PyResult<(Self, u64)> {
        let config = expand_preset(name, PriorChoice::Default, false).map_err(to_py_err)?;
        let env = config.environment.to_environment().map_err(to_py_err)?;
        Ok((PyEnvironment { inner: env }, config.n0))
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    #[getter]
    fn prices(&self) -> Vec<f64> {
        self.inner.grid().prices().to_vec()
    }

    /// Mean demand per (period, price) cell.
    fn mean_demand(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.inner.mean_demand())
    }

    /// Distribution of min(D, cap) at one cell.
    fn capped_demand_pmf(&self, t: usize, k: usize, cap: u64) -> PyResult<Vec<f64>> {
        self.inner.capped_demand_pmf(t, k, cap).map_err(to_py_err)
    }

    /// One demand draw; `price_index=None` is the shut-off action.
    #[pyo3(signature = (t, price_index, seed))]
    fn sample_demand(&self, t: usize, price_index: Option<usize>, seed: u64) -> PyResult<u64> {
        let action = match price_index {
            Some(k) => Action::Price(k),
            None => Action::Shutoff,
        };
        let mut rng = revman::sim::trial_rng(seed);
        self.inner.sample_demand(t, action, &mut rng).map_err(to_py_err)
    }
}

/// Hindsight-optimal value and policy tables.
#[pyclass(name = "ValueTable")]
struct PyValueTable {
    inner: ValueTable,
}

#[pymethods]
impl PyValueTable {
    #[getter]
    fn rev_star(&self) -> f64 {
        self.inner.rev_star()
    }

    fn value(&self, remaining: usize, inventory: usize) -> f64 {
        self.inner.value(remaining, inventory)
    }

    /// Optimal price index at (elapsed period, inventory); None = shut-off.
    fn action(&self, elapsed: usize, inventory: u64) -> PyResult<Option<usize>> {
        self.inner
            .oracle_policy_action(elapsed, inventory)
            .map(Action::price_index)
            .map_err(to_py_err)
    }
}

/// Exact hindsight DP over integer inventory.
#[pyfunction]
fn solve_dp(env: &PyEnvironment, n0: u64) -> PyResult<PyValueTable> {
    Ok(PyValueTable {
        inner: dp_solve(&env.inner, n0).map_err(to_py_err)?,
    })
}

/// Solve the fluid LP; returns {"objective", "dual_mu", "x"}.
#[pyfunction]
#[pyo3(signature = (lambda_matrix, prices, inventory, start = 0))]
fn solve_lp<'py>(
    py: Python<'py>,
    lambda_matrix: Vec<Vec<f64>>,
    prices: Vec<f64>,
    inventory: f64,
    start: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let lambda = matrix_from_rows(lambda_matrix)?;
    let grid = PriceGrid::new(prices).map_err(to_py_err)?;
    let plan = revman::lp::solve_lp(&lambda, start, inventory, &grid).map_err(to_py_err)?;
    let out = PyDict::new_bound(py);
    out.set_item("objective", plan.objective)?;
    out.set_item("dual_mu", plan.dual_mu)?;
    let rows: Vec<Vec<f64>> = (0..plan.rows()).map(|i| plan.row(i).to_vec()).collect();
    out.set_item("x", rows)?;
    Ok(out)
}

/// Single-period benchmark LP with budget inventory/tau.
#[pyfunction]
fn solve_lp_avg<'py>(
    py: Python<'py>,
    lambda_row: Vec<f64>,
    prices: Vec<f64>,
    inventory: f64,
    tau: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let grid = PriceGrid::new(prices).map_err(to_py_err)?;
    let plan = revman::lp::solve_lp_avg(&lambda_row, inventory, tau, &grid).map_err(to_py_err)?;
    let out = PyDict::new_bound(py);
    out.set_item("objective", plan.objective)?;
    out.set_item("dual_mu", plan.dual_mu)?;
    out.set_item("x", plan.row(0).to_vec())?;
    Ok(out)
}

/// Run one trial of S episodes; returns per-episode revenues.
///
/// `policy` is one of ts-episodic, ts-dynamic, ts-fixed-star,
/// ts-update-star, ts-episodic-star, ts-dynamic-star; learning policies
/// need `prior_json` (the prior preset schema).
#[pyfunction]
#[pyo3(signature = (env, policy, n0, episodes, seed, prior_json = None))]
fn run_trial(
    env: &PyEnvironment,
    policy: &str,
    n0: u64,
    episodes: usize,
    seed: u64,
    prior_json: Option<&str>,
) -> PyResult<Vec<f64>> {
    let kind: PolicyKind = policy.parse().map_err(to_py_err)?;
    let prior = match prior_json {
        Some(text) => Some(PriorSpec::from_json(text).map_err(to_py_err)?),
        None => None,
    };
    let result = sim_run_trial(&env.inner, kind, prior.as_ref(), n0, episodes, seed)
        .map_err(to_py_err)?;
    Ok(result.revenues)
}

/// Seed for trial `index` under `base_seed`, as used by the harness.
#[pyfunction]
#[pyo3(name = "trial_seed")]
fn py_trial_seed(base_seed: u64, index: u64) -> u64 {
    trial_seed(base_seed, index)
}

/// Mean and standard error of the relative-regret curve across trials.
#[pyfunction]
fn regret_curve(revenues: Vec<Vec<f64>>, rev_star: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let trials: Vec<TrialResult> = revenues
        .into_iter()
        .map(|r| TrialResult {
            revenues: r,
            seed: 0,
            posterior: None,
        })
        .collect();
    let c = curve(&trials, rev_star).map_err(to_py_err)?;
    Ok((c.mean, c.stderr))
}

#[pymodule]
fn revman_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnvironment>()?;
    m.add_class::<PyValueTable>()?;
    m.add_function(wrap_pyfunction!(solve_dp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lp_avg, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(py_trial_seed, m)?)?;
    m.add_function(wrap_pyfunction!(regret_curve, m)?)?;
    Ok(())
}
