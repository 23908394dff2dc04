//! Solver toolkit for stochastic variational inequalities.
//!
//! The centerpiece is an Anderson(1)-accelerated stochastic extragradient
//! method with a sampled backtracking line search, safeguarded mixing, and
//! growing batch-size schedules, next to a plain line-search SEG baseline.
//! Around it: deterministic splittable random streams, feasible sets with
//! closed-form projections, synthetic problem generators, a brute-force
//! complementarity oracle, a mean-variance portfolio pipeline, and a
//! benchmark harness that emits plot-ready CSV traces.
//!
//! Reproducibility: all randomness is ChaCha8 keyed by (root seed, label
//! path); a run is fully determined by its configuration and seed. Wall-
//! clock columns are the only exception.

// Validations use negated float comparisons (`!(x > 0.0)`) so NaN fails.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod portfolio;
pub mod problems;
pub mod rng;
pub mod sets;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use operators::{OracleErrors, Sample, SampleBatch, StochasticProblem};
pub use rng::RngStream;
pub use sets::FeasibleSet;
pub use solver::{
    anderson_coefficient, line_search, solve, solve_seg, solve_with, step, Algorithm, Branch,
    IterateState, LineSearch, ScheduleKind, ScheduleSpec, SolveReport, SolveStatus, SolverConfig,
    StopRule, TraceRecord,
};
