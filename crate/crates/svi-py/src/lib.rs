//! Python bindings: problem generators, the accelerated solver and its
//! SEG baseline, schedules, mixing, the complementarity oracle, and the
//! portfolio metrics.

// `?` on PyResult trips useless_conversion under pyo3's blanket From.
#![allow(clippy::useless_conversion)]

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use svi_core::linalg::Matrix;
use svi_core::portfolio;
use svi_core::problems::{self, LcpProblem};
use svi_core::solver::{self, ScheduleKind, ScheduleSpec, SolverConfig as CoreConfig, StopRule};
use svi_core::{RngStream, StochasticProblem};

fn err<T>(r: svi_core::Result<T>) -> PyResult<T> {
    r.map_err(|e| PyValueError::new_err(e.to_string()))
}

fn matrix_from_rows(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let n = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    Ok(Matrix::from_rows(&rows))
}

fn schedule_from(kind: &str, n_factor: usize, lam: f64, b: f64, cap: Option<usize>) -> PyResult<ScheduleSpec> {
    let kind = match kind {
        "quad" | "quadratic" => ScheduleKind::Quadratic,
        "linear" => ScheduleKind::Linear,
        other => return Err(PyValueError::new_err(format!("unknown schedule kind '{other}'"))),
    };
    err(ScheduleSpec::new(kind, n_factor, lam, b, cap))
}

/// A stochastic variational inequality instance.
#[pyclass(name = "Problem")]
struct PyProblem {
    inner: StochasticProblem,
}

#[pymethods]
impl PyProblem {
    /// Stochastic complementarity benchmark instance of dimension `n`.
    #[staticmethod]
    fn complementarity(n: usize, seed: u64) -> PyResult<Self> {
        let mut gen = err(RngStream::new_root(seed).split("gen"))?;
        let inst = err(problems::gen_scp(n, &mut gen))?;
        Ok(PyProblem { inner: inst.problem() })
    }

    /// Stochastic fractional quadratic benchmark instance of dimension `n`.
    #[staticmethod]
    fn fractional(n: usize, seed: u64) -> PyResult<Self> {
        let mut gen = err(RngStream::new_root(seed).split("gen"))?;
        let inst = err(problems::gen_fractional(n, &mut gen))?;
        Ok(PyProblem { inner: inst.problem() })
    }

    /// Deterministic complementarity problem H(x) = Mx + q on the
    /// nonnegative orthant.
    #[staticmethod]
    fn from_lcp(m: Vec<Vec<f64>>, q: Vec<f64>) -> PyResult<Self> {
        let lcp = err(LcpProblem::new(matrix_from_rows(m)?, q))?;
        Ok(PyProblem { inner: problems::lcp_to_svi(&lcp, None) })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn has_exact_mean(&self) -> bool {
        self.inner.has_exact_mean()
    }

    /// Exact residual ||P_X(x - t H(x)) - x|| when the mean operator is
    /// available.
    fn exact_residual(&self, x: Vec<f64>, t: f64) -> PyResult<f64> {
        err(self.inner.exact_residual(&x, t))
    }
}

/// Solver parameters; defaults follow the benchmark setting
/// (rho = 0.8, mu = 0.5, nu = 30, tau = 0.6, M = 5000).
#[pyclass(name = "SolverConfig")]
#[derive(Clone)]
struct PySolverConfig {
    inner: CoreConfig,
}

#[pymethods]
impl PySolverConfig {
    #[new]
    #[pyo3(signature = (
        gamma,
        rho = 0.8,
        mu = 0.5,
        nu = 30.0,
        tau = 0.6,
        safeguard_cap = 5000.0,
        schedule = "linear",
        n_factor = 20,
        lam = 5.0,
        b = 0.1,
        schedule_cap = None,
        residual_tol = 1e-2,
        max_iters = 200,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        gamma: f64,
        rho: f64,
        mu: f64,
        nu: f64,
        tau: f64,
        safeguard_cap: f64,
        schedule: &str,
        n_factor: usize,
        lam: f64,
        b: f64,
        schedule_cap: Option<usize>,
        residual_tol: f64,
        max_iters: u64,
    ) -> PyResult<Self> {
        let spec = schedule_from(schedule, n_factor, lam, b, schedule_cap)?;
        let cfg = err(CoreConfig::new(
            gamma,
            rho,
            mu,
            nu,
            tau,
            safeguard_cap,
            spec,
            StopRule::new(residual_tol, max_iters),
        ))?;
        Ok(PySolverConfig { inner: cfg })
    }
}

/// Solve outcome: final iterate, status, and per-iteration summaries.
#[pyclass(name = "SolveResult")]
struct PySolveResult {
    #[pyo3(get)]
    x: Vec<f64>,
    #[pyo3(get)]
    status: String,
    #[pyo3(get)]
    iterations: u64,
    #[pyo3(get)]
    anderson_steps: u64,
    #[pyo3(get)]
    oracle_calls: u64,
    #[pyo3(get)]
    final_residual: Option<f64>,
    #[pyo3(get)]
    residuals: Vec<f64>,
    #[pyo3(get)]
    exact_residuals: Option<Vec<f64>>,
    #[pyo3(get)]
    branches: Vec<String>,
    #[pyo3(get)]
    step_sizes: Vec<f64>,
}

fn run(problem: &PyProblem, config: &PySolverConfig, x0: Option<Vec<f64>>, seed: u64, algorithm: &str) -> PyResult<PySolveResult> {
    let x0 = x0.unwrap_or_else(|| vec![0.0; problem.inner.dim()]);
    let root = RngStream::new_root(seed);
    let report = match algorithm {
        "aseg" => err(solver::solve(&problem.inner, &config.inner, &x0, &root))?,
        "seg" => err(solver::solve_seg(&problem.inner, &config.inner, &x0, &root))?,
        other => return Err(PyValueError::new_err(format!("unknown algorithm '{other}'"))),
    };
    let exact: Vec<f64> = report.trace.iter().filter_map(|r| r.exact_residual).collect();
    Ok(PySolveResult {
        status: report.status.as_str().to_string(),
        iterations: report.trace.len() as u64,
        anderson_steps: report.anderson_steps(),
        oracle_calls: report.oracle_calls(),
        final_residual: report.final_residual,
        residuals: report.trace.iter().map(|r| r.empirical_residual).collect(),
        exact_residuals: if exact.len() == report.trace.len() { Some(exact) } else { None },
        branches: report.trace.iter().map(|r| r.branch.as_str().to_string()).collect(),
        step_sizes: report.trace.iter().map(|r| r.t_k).collect(),
        x: report.x,
    })
}

/// Run the Anderson(1)-accelerated stochastic extragradient method (or
/// the SEG baseline with algorithm="seg") from `x0`, reproducibly keyed
/// by `seed`.
#[pyfunction]
#[pyo3(signature = (problem, config, x0 = None, seed = 42, algorithm = "aseg"))]
fn solve(
    problem: &PyProblem,
    config: &PySolverConfig,
    x0: Option<Vec<f64>>,
    seed: u64,
    algorithm: &str,
) -> PyResult<PySolveResult> {
    run(problem, config, x0, seed, algorithm)
}

/// Batch size S_k of the growing sample schedule.
#[pyfunction]
#[pyo3(signature = (kind, n_factor, lam, b, k, cap = None))]
fn schedule_size(kind: &str, n_factor: usize, lam: f64, b: f64, k: u64, cap: Option<usize>) -> PyResult<usize> {
    Ok(schedule_from(kind, n_factor, lam, b, cap)?.size_at(k))
}

/// Least-squares mixing coefficient <F~, F~ - F> / ||F~ - F||^2.
#[pyfunction]
fn anderson_coefficient(f: Vec<f64>, f_tilde: Vec<f64>) -> PyResult<f64> {
    err(solver::anderson_coefficient(&f, &f_tilde))
}

/// All complementarity solutions of an LCP by complementary-basis
/// enumeration (sides up to 16).
#[pyfunction]
fn brute_force_lcp(m: Vec<Vec<f64>>, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let lcp = err(LcpProblem::new(matrix_from_rows(m)?, q))?;
    err(problems::brute_force_lcp(&lcp))
}

/// Out-of-sample Sharpe ratio of weights `w` on a returns matrix.
#[pyfunction]
fn sharpe(w: Vec<f64>, returns: Vec<Vec<f64>>) -> PyResult<f64> {
    err(portfolio::sharpe(&w, &matrix_from_rows(returns)?))
}

/// Cumulative and annualized return of weights `w`; frequency is
/// "weekly" (x50) or "daily" (x250).
#[pyfunction]
fn cumulative_and_annualized(w: Vec<f64>, returns: Vec<Vec<f64>>, frequency: &str) -> PyResult<(f64, f64)> {
    let freq: portfolio::Frequency = err(frequency.parse())?;
    err(portfolio::cumulative_and_annualized(&w, &matrix_from_rows(returns)?, freq))
}

/// The evenly weighted portfolio.
#[pyfunction]
fn naive_weights(n: usize) -> Vec<f64> {
    portfolio::naive_weights(n)
}

#[pymodule]
fn svi_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PySolverConfig>()?;
    m.add_class::<PySolveResult>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_size, m)?)?;
    m.add_function(wrap_pyfunction!(anderson_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_lcp, m)?)?;
    m.add_function(wrap_pyfunction!(sharpe, m)?)?;
    m.add_function(wrap_pyfunction!(cumulative_and_annualized, m)?)?;
    m.add_function(wrap_pyfunction!(naive_weights, m)?)?;
    Ok(())
}
