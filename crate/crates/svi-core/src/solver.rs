//! Anderson(1)-accelerated stochastic extragradient solver and the
//! line-search SEG baseline.
//!
//! Each iteration draws two independent sample batches, runs a stochastic
//! backtracking line search on the first, takes an extragradient step with
//! the second, and then either mixes the two fixed-point residuals with a
//! safeguarded least-squares coefficient (Anderson branch) or falls back
//! to the plain extragradient update (SEG branch).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{add_scaled, dot, norm2, sub};
use crate::operators::{SampleBatch, StochasticProblem};
use crate::rng::RngStream;

/// Scale-relative tolerance standing in for the exact test "F = 0".
const REST_TOL: f64 = 1e-14;
/// Scale-relative tolerance guarding the mixing denominator.
const MIXING_TOL: f64 = 1e-14;

/// Batch-size schedule S_k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleKind {
    /// S_k = N * ceil((k+lambda)^2 * ln(k+lambda)^(2+2b))
    Quadratic,
    /// S_k = N * ceil((k+lambda) * ln(k+lambda)^(1+b))
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub n_factor: usize,
    pub lambda: f64,
    pub b: f64,
    pub cap: Option<usize>,
}

impl ScheduleSpec {
    pub fn quadratic(n_factor: usize, lambda: f64, b: f64) -> Result<Self> {
        Self::new(ScheduleKind::Quadratic, n_factor, lambda, b, None)
    }

    pub fn linear(n_factor: usize, lambda: f64, b: f64) -> Result<Self> {
        Self::new(ScheduleKind::Linear, n_factor, lambda, b, None)
    }

    pub fn new(
        kind: ScheduleKind,
        n_factor: usize,
        lambda: f64,
        b: f64,
        cap: Option<usize>,
    ) -> Result<Self> {
        if n_factor == 0 {
            return Err(Error::ConfigError("schedule factor must be >= 1".into()));
        }
        match kind {
            ScheduleKind::Quadratic if !(lambda > 2.0) => {
                return Err(Error::ConfigError(format!(
                    "quadratic schedule requires lambda > 2, got {lambda}"
                )));
            }
            ScheduleKind::Linear if !(lambda > 1.0) => {
                return Err(Error::ConfigError(format!(
                    "linear schedule requires lambda > 1, got {lambda}"
                )));
            }
            _ => {}
        }
        if !(b > 0.0) {
            return Err(Error::ConfigError(format!("schedule exponent b must be > 0, got {b}")));
        }
        if cap == Some(0) {
            return Err(Error::ConfigError("schedule cap must be >= 1".into()));
        }
        Ok(ScheduleSpec { kind, n_factor, lambda, b, cap })
    }

    pub fn with_cap(mut self, cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(Error::ConfigError("schedule cap must be >= 1".into()));
        }
        self.cap = Some(cap);
        Ok(self)
    }

    /// Batch size S_k at iteration k.
    pub fn size_at(&self, k: u64) -> usize {
        let base = k as f64 + self.lambda;
        let ln = base.ln();
        let raw = match self.kind {
            ScheduleKind::Quadratic => base * base * ln.powf(2.0 + 2.0 * self.b),
            ScheduleKind::Linear => base * ln.powf(1.0 + self.b),
        };
        let s = self.n_factor * raw.ceil() as usize;
        match self.cap {
            Some(c) => s.min(c),
            None => s,
        }
    }
}

/// Stopping rule: residual tolerance, iteration budget, and the
/// floating-point stall guard on line-search backtracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub residual_tol: f64,
    pub max_iters: u64,
    pub max_backtracks: u32,
}

impl StopRule {
    pub fn new(residual_tol: f64, max_iters: u64) -> Self {
        StopRule { residual_tol, max_iters, max_backtracks: 200 }
    }
}

/// Solver parameters. Ranges are validated at construction: gamma in
/// (0,1], rho in (0,1), mu in (0, sqrt(3)/3), nu >= 0, tau > 1/2, and a
/// positive mixing cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub gamma: f64,
    pub rho: f64,
    pub mu: f64,
    pub nu: f64,
    pub tau: f64,
    pub safeguard_cap: f64,
    pub schedule: ScheduleSpec,
    pub stop: StopRule,
}

impl SolverConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        gamma: f64,
        rho: f64,
        mu: f64,
        nu: f64,
        tau: f64,
        safeguard_cap: f64,
        schedule: ScheduleSpec,
        stop: StopRule,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::ConfigError(format!("gamma must be in (0, 1], got {gamma}")));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::ConfigError(format!("rho must be in (0, 1), got {rho}")));
        }
        let mu_max = 3.0f64.sqrt() / 3.0;
        if !(mu > 0.0 && mu < mu_max) {
            return Err(Error::ConfigError(format!("mu must be in (0, {mu_max:.6}), got {mu}")));
        }
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(Error::ConfigError(format!("nu must be nonnegative, got {nu}")));
        }
        if !(tau > 0.5) {
            return Err(Error::ConfigError(format!("tau must be > 1/2, got {tau}")));
        }
        if !(safeguard_cap > 0.0) {
            return Err(Error::ConfigError(format!("mixing cap must be positive, got {safeguard_cap}")));
        }
        Ok(SolverConfig { gamma, rho, mu, nu, tau, safeguard_cap, schedule, stop })
    }

    /// The benchmark parameter set: nu = 30, M = 5000, tau = 0.6,
    /// rho = 0.8, mu = 0.5.
    pub fn benchmark_defaults(gamma: f64, schedule: ScheduleSpec, stop: StopRule) -> Result<Self> {
        Self::new(gamma, 0.8, 0.5, 30.0, 0.6, 5000.0, schedule, stop)
    }
}

/// Which update rule drives the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    AndersonSeg,
    Seg,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::AndersonSeg => "aseg",
            Algorithm::Seg => "seg",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aseg" => Ok(Algorithm::AndersonSeg),
            "seg" => Ok(Algorithm::Seg),
            other => Err(Error::ConfigError(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Branch taken by one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Rest,
    Anderson,
    Seg,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Rest => "rest",
            Branch::Anderson => "anderson",
            Branch::Seg => "seg",
        }
    }
}

/// Iterate (x_k, theta_k, k). theta counts accepted Anderson steps plus
/// one and only ever increases on the Anderson branch.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub x: Vec<f64>,
    pub theta: u64,
    pub k: u64,
}

impl IterateState {
    pub fn new(x0: Vec<f64>) -> Self {
        IterateState { x: x0, theta: 1, k: 0 }
    }
}

/// Per-iteration trace record.
///
/// `oracle_calls_cum` accumulates (1 + backtracks) * S_k per iteration,
/// the quantity the oracle-complexity bound counts. `exact_residual` is
/// r_gamma(x_k) and is present only when the problem exposes an exact
/// mean operator. `elapsed_seconds` is wall clock and is excluded from
/// trace equality (`math_eq`) and from reproducibility comparisons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: u64,
    pub branch: Branch,
    pub t_k: f64,
    pub backtracks: u32,
    pub s_k: usize,
    pub alpha: Option<f64>,
    pub norm_f: f64,
    pub norm_f_tilde: Option<f64>,
    pub empirical_residual: f64,
    pub exact_residual: Option<f64>,
    pub oracle_calls_cum: u64,
    pub elapsed_seconds: f64,
}

impl TraceRecord {
    /// Exact equality of everything except wall-clock time.
    pub fn math_eq(&self, other: &TraceRecord) -> bool {
        self.k == other.k
            && self.branch == other.branch
            && self.t_k == other.t_k
            && self.backtracks == other.backtracks
            && self.s_k == other.s_k
            && self.alpha == other.alpha
            && self.norm_f == other.norm_f
            && self.norm_f_tilde == other.norm_f_tilde
            && self.empirical_residual == other.empirical_residual
            && self.exact_residual == other.exact_residual
            && self.oracle_calls_cum == other.oracle_calls_cum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Stalled,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::Stalled => "stalled",
        }
    }
}

/// Full solve outcome.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub trace: Vec<TraceRecord>,
    pub status: SolveStatus,
    pub theta: u64,
    /// Residual that triggered the stop (the stopping-rule residual at the
    /// final iterate when one was evaluated).
    pub final_residual: Option<f64>,
}

impl SolveReport {
    pub fn anderson_steps(&self) -> u64 {
        self.trace.iter().filter(|r| r.branch == Branch::Anderson).count() as u64
    }

    pub fn backtracks_total(&self) -> u64 {
        self.trace.iter().map(|r| r.backtracks as u64).sum()
    }

    pub fn oracle_calls(&self) -> u64 {
        self.trace.last().map(|r| r.oracle_calls_cum).unwrap_or(0)
    }
}

/// Outcome of the stochastic backtracking line search.
#[derive(Debug, Clone)]
pub struct LineSearch {
    pub t: f64,
    pub y_half: Vec<f64>,
    pub backtracks: u32,
}

/// Backtracking line search on the fixed xi-batch: the largest
/// t = gamma * rho^m with
/// t * ||H_xi(x) - H_xi(y(t))|| <= mu * ||x - y(t)||,
/// where y(t) = P_X(x - t * H_xi(x)). The batch estimator at x is
/// evaluated once; each trial re-evaluates it at y(t) only.
pub fn line_search(
    problem: &StochasticProblem,
    batch_xi: &SampleBatch,
    x: &[f64],
    cfg: &SolverConfig,
) -> Result<LineSearch> {
    let h_x = problem.empirical_operator(batch_xi, x)?;
    line_search_from(problem, batch_xi, x, &h_x, cfg)
}

fn line_search_from(
    problem: &StochasticProblem,
    batch_xi: &SampleBatch,
    x: &[f64],
    h_x: &[f64],
    cfg: &SolverConfig,
) -> Result<LineSearch> {
    let mut t = cfg.gamma;
    let mut m = 0u32;
    loop {
        let y = problem.set().project(&add_scaled(x, -t, h_x))?;
        let h_y = problem.empirical_operator(batch_xi, &y)?;
        if t * norm2(&sub(h_x, &h_y)) <= cfg.mu * norm2(&sub(x, &y)) {
            return Ok(LineSearch { t, y_half: y, backtracks: m });
        }
        m += 1;
        if m > cfg.stop.max_backtracks {
            return Err(Error::LineSearchStalled(cfg.stop.max_backtracks));
        }
        t *= cfg.rho;
    }
}

/// Least-squares mixing coefficient
/// alpha = <F~, F~ - F> / ||F~ - F||^2,
/// the minimizer of ||alpha*F + (1-alpha)*F~|| over the real line.
/// Errors with `DegenerateMixing` when the denominator is at noise level;
/// callers fall back to the plain extragradient update.
pub fn anderson_coefficient(f: &[f64], f_tilde: &[f64]) -> Result<f64> {
    let d = sub(f_tilde, f);
    let dn2 = dot(&d, &d);
    if dn2.sqrt() <= MIXING_TOL * (norm2(f) + norm2(f_tilde) + 1.0) {
        return Err(Error::DegenerateMixing);
    }
    Ok(dot(f_tilde, &d) / dn2)
}

/// Everything evaluated before an iteration commits to a branch: the two
/// batches, the xi-estimator at x_k, the rest-branch vector norm, and the
/// stopping-rule residual (unit-step, same batch, zero extra oracle cost).
struct StageEval {
    s_k: usize,
    batch_xi: SampleBatch,
    batch_eta: SampleBatch,
    h_xi_x: Vec<f64>,
    f_gamma_norm: f64,
    residual: f64,
    exact_residual: Option<f64>,
}

type BatchSource<'a> = dyn FnMut(u64, usize) -> Result<(SampleBatch, SampleBatch)> + 'a;

fn evaluate_stage(
    problem: &StochasticProblem,
    cfg: &SolverConfig,
    k: u64,
    x: &[f64],
    batches: &mut BatchSource<'_>,
) -> Result<StageEval> {
    let s_k = cfg.schedule.size_at(k);
    let (batch_xi, batch_eta) = batches(k, s_k)?;
    let h_xi_x = problem.empirical_operator(&batch_xi, x)?;
    let f_gamma = sub(&problem.set().project(&add_scaled(x, -cfg.gamma, &h_xi_x))?, x);
    let residual = norm2(&sub(&problem.set().project(&add_scaled(x, -1.0, &h_xi_x))?, x));
    let exact_residual = if problem.has_exact_mean() {
        Some(problem.exact_residual(x, cfg.gamma)?)
    } else {
        None
    };
    Ok(StageEval {
        s_k,
        batch_xi,
        batch_eta,
        h_xi_x,
        f_gamma_norm: norm2(&f_gamma),
        residual,
        exact_residual,
    })
}

struct StepOutput {
    x_next: Vec<f64>,
    theta_next: u64,
    branch: Branch,
    t_k: f64,
    backtracks: u32,
    alpha: Option<f64>,
    norm_f: f64,
    norm_f_tilde: Option<f64>,
}

fn complete_step(
    problem: &StochasticProblem,
    cfg: &SolverConfig,
    algo: Algorithm,
    x: &[f64],
    theta: u64,
    stage: &StageEval,
) -> Result<StepOutput> {
    // Rest branch: the gamma-step batch residual already vanishes.
    if stage.f_gamma_norm <= REST_TOL * (1.0 + norm2(x)) {
        return Ok(StepOutput {
            x_next: x.to_vec(),
            theta_next: theta,
            branch: Branch::Rest,
            t_k: cfg.gamma,
            backtracks: 0,
            alpha: None,
            norm_f: stage.f_gamma_norm,
            norm_f_tilde: None,
        });
    }

    let ls = line_search_from(problem, &stage.batch_xi, x, &stage.h_xi_x, cfg)?;
    let f = sub(&ls.y_half, x);
    let norm_f = norm2(&f);

    let h_eta = problem.empirical_operator(&stage.batch_eta, &ls.y_half)?;
    let y_next = problem.set().project(&add_scaled(x, -ls.t, &h_eta))?;
    let f_tilde = sub(&y_next, x);
    let norm_f_tilde = norm2(&f_tilde);

    let mut branch = Branch::Seg;
    let mut alpha_out = None;
    let mut x_next = y_next.clone();
    let mut theta_next = theta;

    if algo == Algorithm::AndersonSeg {
        // Acceptance gate, strict inequality; ties fall through to SEG.
        let gate = norm_f_tilde < norm_f.min(cfg.nu * (theta as f64).powf(-cfg.tau));
        if gate {
            match anderson_coefficient(&f, &f_tilde) {
                Ok(alpha) => {
                    alpha_out = Some(alpha);
                    if alpha.abs() <= cfg.safeguard_cap {
                        x_next = x
                            .iter()
                            .zip(&y_next)
                            .map(|(xi, yi)| alpha * xi + (1.0 - alpha) * yi)
                            .collect();
                        theta_next = theta + 1;
                        branch = Branch::Anderson;
                    }
                }
                Err(Error::DegenerateMixing) => {}
                Err(e) => return Err(e),
            }
        }
    }

    Ok(StepOutput {
        x_next,
        theta_next,
        branch,
        t_k: ls.t,
        backtracks: ls.backtracks,
        alpha: alpha_out,
        norm_f,
        norm_f_tilde: Some(norm_f_tilde),
    })
}

/// One full iteration: draw both batches at size S_k from the two given
/// streams, then run rest test, line search, extragradient step, and the
/// safeguarded mixing update. `oracle_calls_cum` in the returned record
/// covers this invocation only.
pub fn step(
    state: &IterateState,
    problem: &StochasticProblem,
    cfg: &SolverConfig,
    stream_xi: &mut RngStream,
    stream_eta: &mut RngStream,
) -> Result<(IterateState, TraceRecord)> {
    let started = Instant::now();
    let mut source = |_k: u64, s: usize| -> Result<(SampleBatch, SampleBatch)> {
        Ok((problem.sample_batch(s, stream_xi)?, problem.sample_batch(s, stream_eta)?))
    };
    let stage = evaluate_stage(problem, cfg, state.k, &state.x, &mut source)?;
    let out = complete_step(problem, cfg, Algorithm::AndersonSeg, &state.x, state.theta, &stage)?;
    let record = TraceRecord {
        k: state.k,
        branch: out.branch,
        t_k: out.t_k,
        backtracks: out.backtracks,
        s_k: stage.s_k,
        alpha: out.alpha,
        norm_f: out.norm_f,
        norm_f_tilde: out.norm_f_tilde,
        empirical_residual: stage.residual,
        exact_residual: stage.exact_residual,
        oracle_calls_cum: (1 + out.backtracks as u64) * stage.s_k as u64,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    let state = IterateState { x: out.x_next, theta: out.theta_next, k: state.k + 1 };
    Ok((state, record))
}

/// Per-iterate observer: called with (k, x_k) for every iterate produced,
/// including the initial point and the final one.
pub type Observer<'a> = dyn FnMut(u64, &[f64]) + 'a;

/// Core loop shared by all entry points. `batches` supplies the two
/// batches for iteration k at schedule size S_k; a line-search stall ends
/// the run with `SolveStatus::Stalled` and the trace collected so far.
pub fn solve_with(
    problem: &StochasticProblem,
    cfg: &SolverConfig,
    x0: &[f64],
    algo: Algorithm,
    batches: &mut BatchSource<'_>,
    mut observer: Option<&mut Observer<'_>>,
) -> Result<SolveReport> {
    let started = Instant::now();
    let mut x = problem.set().project(x0)?;
    let mut theta = 1u64;
    let mut k = 0u64;
    let mut oracle_cum = 0u64;
    let mut trace = Vec::new();
    if let Some(obs) = observer.as_deref_mut() {
        obs(0, &x);
    }
    let (status, final_residual) = loop {
        let stage = evaluate_stage(problem, cfg, k, &x, batches)?;
        if stage.residual < cfg.stop.residual_tol {
            break (SolveStatus::Converged, Some(stage.residual));
        }
        if k >= cfg.stop.max_iters {
            break (SolveStatus::MaxIters, Some(stage.residual));
        }
        match complete_step(problem, cfg, algo, &x, theta, &stage) {
            Ok(out) => {
                oracle_cum += (1 + out.backtracks as u64) * stage.s_k as u64;
                trace.push(TraceRecord {
                    k,
                    branch: out.branch,
                    t_k: out.t_k,
                    backtracks: out.backtracks,
                    s_k: stage.s_k,
                    alpha: out.alpha,
                    norm_f: out.norm_f,
                    norm_f_tilde: out.norm_f_tilde,
                    empirical_residual: stage.residual,
                    exact_residual: stage.exact_residual,
                    oracle_calls_cum: oracle_cum,
                    elapsed_seconds: started.elapsed().as_secs_f64(),
                });
                x = out.x_next;
                theta = out.theta_next;
                k += 1;
                if let Some(obs) = observer.as_deref_mut() {
                    obs(k, &x);
                }
            }
            Err(Error::LineSearchStalled(_)) => {
                break (SolveStatus::Stalled, Some(stage.residual));
            }
            Err(e) => return Err(e),
        }
    };
    Ok(SolveReport { x, trace, status, theta, final_residual })
}

fn stream_batches<'a>(
    problem: &'a StochasticProblem,
    root: &'a RngStream,
) -> impl FnMut(u64, usize) -> Result<(SampleBatch, SampleBatch)> + 'a {
    move |k, s| {
        let mut sx = root.split(&format!("xi/{k}"))?;
        let mut se = root.split(&format!("eta/{k}"))?;
        Ok((problem.sample_batch(s, &mut sx)?, problem.sample_batch(s, &mut se)?))
    }
}

/// Run the Anderson(1)-accelerated stochastic extragradient method from
/// `x0` (projected onto X first). Iteration k draws its xi- and eta-
/// batches from the child streams `xi/{k}` and `eta/{k}` of `root`, so a
/// run is fully determined by the problem, the configuration, and the
/// stream identity.
pub fn solve(
    problem: &StochasticProblem,
    cfg: &SolverConfig,
    x0: &[f64],
    root: &RngStream,
) -> Result<SolveReport> {
    let mut batches = stream_batches(problem, root);
    solve_with(problem, cfg, x0, Algorithm::AndersonSeg, &mut batches, None)
}

/// The line-search SEG baseline: identical sampling, line search, and
/// extragradient update, with the mixing gate and coefficient skipped so
/// every iteration takes the plain extragradient branch.
pub fn solve_seg(
    problem: &StochasticProblem,
    cfg: &SolverConfig,
    x0: &[f64],
    root: &RngStream,
) -> Result<SolveReport> {
    let mut batches = stream_batches(problem, root);
    solve_with(problem, cfg, x0, Algorithm::Seg, &mut batches, None)
}
