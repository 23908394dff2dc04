//! Benchmark harness: generates problem instances, runs the accelerated
//! solver against the SEG baseline across seeds, and emits CSV traces and
//! summaries plus the portfolio pipeline's metrics JSON.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::operators::{Sample, SampleBatch, StochasticProblem};
use crate::portfolio::{
    build_lcp, column_means, covariance, cumulative_and_annualized, load_prices, log_returns,
    naive_weights, sharpe, split_returns, windowed_moments, Frequency, PortfolioSpec,
};
use crate::problems::{gen_fractional, gen_scp, lcp_to_svi, FracInstance, LcpProblem, LcpSample, ScpInstance};
use crate::rng::RngStream;
use crate::solver::{
    solve_with, Algorithm, ScheduleSpec, SolveReport, SolveStatus, SolverConfig, StopRule,
    TraceRecord,
};

/// Problem family of an experiment.
#[derive(Debug, Clone)]
pub enum Family {
    /// Stochastic complementarity benchmark on the nonnegative orthant.
    Complementarity,
    /// Stochastic fractional quadratic benchmark on the box [0, 4e].
    FractionalQuadratic,
    /// Deterministic complementarity problem supplied by the caller.
    CustomLcp(LcpProblem),
}

impl Family {
    /// Short tag used in output file names and the CLI.
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Complementarity => "example1",
            Family::FractionalQuadratic => "example2",
            Family::CustomLcp(_) => "lcp",
        }
    }
}

/// Full description of one benchmark run.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub family: Family,
    pub n: usize,
    pub gamma: f64,
    pub schedule: ScheduleSpec,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub stop: StopRule,
    pub output_dir: PathBuf,
    pub rho: f64,
    pub mu: f64,
    pub nu: f64,
    pub tau: f64,
    pub safeguard_cap: f64,
}

impl ExperimentSpec {
    /// Benchmark defaults: nu = 30, M = 5000, tau = 0.6, rho = 0.8,
    /// mu = 0.5.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        family: Family,
        n: usize,
        gamma: f64,
        schedule: ScheduleSpec,
        seeds: Vec<u64>,
        algorithms: Vec<Algorithm>,
        stop: StopRule,
        output_dir: PathBuf,
    ) -> Self {
        ExperimentSpec {
            family,
            n,
            gamma,
            schedule,
            seeds,
            algorithms,
            stop,
            output_dir,
            rho: 0.8,
            mu: 0.5,
            nu: 30.0,
            tau: 0.6,
            safeguard_cap: 5000.0,
        }
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        SolverConfig::new(
            self.gamma,
            self.rho,
            self.mu,
            self.nu,
            self.tau,
            self.safeguard_cap,
            self.schedule.clone(),
            self.stop.clone(),
        )
    }

    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::ConfigError("at least one seed is required".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::ConfigError("at least one algorithm is required".into()));
        }
        self.solver_config().map(|_| ())
    }
}

/// Problem, start point, and solver stream for one (family, seed) trial.
/// Both algorithms of a seed share all three, so comparisons are paired.
pub struct PreparedTrial {
    pub problem: StochasticProblem,
    pub x0: Vec<f64>,
    pub solve_root: RngStream,
    pub scp: Option<ScpInstance>,
    pub frac: Option<FracInstance>,
}

/// Deterministic trial construction: the generator stream is the `gen`
/// child of the seed's root stream, the start point is uniform on (0,1)
/// per coordinate from the `x0` child, and the solver draws from the
/// `solve` child.
pub fn prepare_trial(family: &Family, n: usize, seed: u64) -> Result<PreparedTrial> {
    let root = RngStream::new_root(seed);
    let mut gen = root.split("gen")?;
    let (problem, scp, frac) = match family {
        Family::Complementarity => {
            let inst = gen_scp(n, &mut gen)?;
            (inst.problem(), Some(inst), None)
        }
        Family::FractionalQuadratic => {
            let inst = gen_fractional(n, &mut gen)?;
            (inst.problem(), None, Some(inst))
        }
        Family::CustomLcp(lcp) => (lcp_to_svi(lcp, None), None, None),
    };
    let dim = problem.dim();
    let mut x0_stream = root.split("x0")?;
    let x0 = x0_stream.uniform_vec(dim, 0.0, 1.0)?;
    Ok(PreparedTrial { problem, x0, solve_root: root.split("solve")?, scp, frac })
}

/// One row of the experiment summary.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRow {
    pub seed: u64,
    pub algo: Algorithm,
    pub iters: u64,
    pub anderson_steps: u64,
    pub backtracks_total: u64,
    pub oracle_calls: u64,
    pub cpu_seconds: f64,
    pub final_empirical_residual: Option<f64>,
    pub status: SolveStatus,
}

/// Per-algorithm means over seeds.
#[derive(Debug, Clone, Serialize)]
pub struct AlgoMean {
    pub algo: Algorithm,
    pub mean_iters: f64,
    pub mean_anderson_steps: f64,
    pub mean_cpu_seconds: f64,
    pub mean_oracle_calls: f64,
}

#[derive(Debug, Clone)]
pub struct SummaryTable {
    pub rows: Vec<TrialRow>,
    pub means: Vec<AlgoMean>,
}

impl SummaryTable {
    pub fn mean_for(&self, algo: Algorithm) -> Option<&AlgoMean> {
        self.means.iter().find(|m| m.algo == algo)
    }
}

struct TrialOutcome {
    row: TrialRow,
    trace: Vec<TraceRecord>,
}

fn run_trial(spec: &ExperimentSpec, seed: u64, algo: Algorithm) -> Result<TrialOutcome> {
    let prepared = prepare_trial(&spec.family, spec.n, seed)?;
    let cfg = spec.solver_config()?;
    let started = Instant::now();
    let report = solve_trial(&prepared, &cfg, algo)?;
    let cpu_seconds = started.elapsed().as_secs_f64();
    Ok(TrialOutcome {
        row: TrialRow {
            seed,
            algo,
            iters: report.trace.len() as u64,
            anderson_steps: report.anderson_steps(),
            backtracks_total: report.backtracks_total(),
            oracle_calls: report.oracle_calls(),
            cpu_seconds,
            final_empirical_residual: report.final_residual,
            status: report.status,
        },
        trace: report.trace,
    })
}

/// Solve one prepared trial with the given algorithm (stream-driven
/// batches).
pub fn solve_trial(
    prepared: &PreparedTrial,
    cfg: &SolverConfig,
    algo: Algorithm,
) -> Result<SolveReport> {
    let problem = &prepared.problem;
    let root = &prepared.solve_root;
    let mut batches = |k: u64, s: usize| -> Result<(SampleBatch, SampleBatch)> {
        let mut sx = root.split(&format!("xi/{k}"))?;
        let mut se = root.split(&format!("eta/{k}"))?;
        Ok((problem.sample_batch(s, &mut sx)?, problem.sample_batch(s, &mut se)?))
    };
    solve_with(problem, cfg, &prepared.x0, algo, &mut batches, None)
}

fn worker_count(trials: usize) -> usize {
    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = std::env::var("SVI_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(hw);
    cap.min(trials).max(1)
}

/// Run every (seed, algorithm) trial, write one trace CSV per trial plus
/// `summary.csv`, and return the summary. Trials may run concurrently
/// (bounded by `SVI_THREADS`); outputs are merged in trial order so the
/// files are identical however many workers run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SummaryTable> {
    spec.validate()?;
    std::fs::create_dir_all(&spec.output_dir).map_err(|source| Error::IoError {
        path: spec.output_dir.display().to_string(),
        source,
    })?;
    let trials: Vec<(u64, Algorithm)> = spec
        .seeds
        .iter()
        .flat_map(|&s| spec.algorithms.iter().map(move |&a| (s, a)))
        .collect();
    let slots: Mutex<Vec<Option<Result<TrialOutcome>>>> =
        Mutex::new((0..trials.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = worker_count(trials.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= trials.len() {
                    break;
                }
                let (seed, algo) = trials[i];
                let outcome = run_trial(spec, seed, algo);
                if let Some(s) = slots.lock().expect("trial slot lock").get_mut(i) {
                    *s = Some(outcome);
                }
            });
        }
    });
    let mut rows = Vec::with_capacity(trials.len());
    for (i, slot) in slots.into_inner().expect("trial slots").into_iter().enumerate() {
        let outcome = slot.expect("trial executed")?;
        let (seed, algo) = trials[i];
        let path = spec
            .output_dir
            .join(format!("trace_{}_{}_seed{}.csv", spec.family.tag(), algo.as_str(), seed));
        write_trace_csv(&path, &outcome.trace)?;
        rows.push(outcome.row);
    }
    write_instances(spec)?;
    let means = spec
        .algorithms
        .iter()
        .map(|&algo| {
            let of_algo: Vec<&TrialRow> = rows.iter().filter(|r| r.algo == algo).collect();
            let count = of_algo.len() as f64;
            AlgoMean {
                algo,
                mean_iters: of_algo.iter().map(|r| r.iters as f64).sum::<f64>() / count,
                mean_anderson_steps: of_algo.iter().map(|r| r.anderson_steps as f64).sum::<f64>()
                    / count,
                mean_cpu_seconds: of_algo.iter().map(|r| r.cpu_seconds).sum::<f64>() / count,
                mean_oracle_calls: of_algo.iter().map(|r| r.oracle_calls as f64).sum::<f64>()
                    / count,
            }
        })
        .collect();
    let table = SummaryTable { rows, means };
    write_summary_csv(&spec.output_dir.join("summary.csv"), &table)?;
    Ok(table)
}

/// Provenance dump: one JSON instance description per seed (matrices
/// row-major, generator seed and stream label recorded).
fn write_instances(spec: &ExperimentSpec) -> Result<()> {
    for &seed in &spec.seeds {
        let prepared = prepare_trial(&spec.family, spec.n, seed)?;
        let json = match (&prepared.scp, &prepared.frac) {
            (Some(inst), _) => serde_json::to_string_pretty(inst),
            (_, Some(inst)) => serde_json::to_string_pretty(inst),
            _ => continue, // custom LCPs come from the caller's own file
        }
        .map_err(|e| Error::DataError(format!("instance serialization: {e}")))?;
        let path = spec
            .output_dir
            .join(format!("instance_{}_seed{}.json", spec.family.tag(), seed));
        std::fs::write(&path, json + "\n").map_err(io_err(&path))?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|source| Error::IoError {
        path: path.display().to_string(),
        source,
    })?;
    Ok(std::io::BufWriter::new(f))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::IoError { path: path.display().to_string(), source }
}

pub const TRACE_HEADER: &str =
    "k,branch,t_k,backtracks,s_k,alpha,norm_f,norm_f_tilde,empirical_residual,exact_residual,oracle_calls_cum,elapsed_seconds";

/// Write a solver trace as CSV: '.' decimal, comma delimiter, UTF-8, LF.
pub fn write_trace_csv(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut f = create_file(path)?;
    writeln!(f, "{TRACE_HEADER}").map_err(io_err(path))?;
    for r in trace {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.branch.as_str(),
            r.t_k,
            r.backtracks,
            r.s_k,
            fmt_opt(r.alpha),
            r.norm_f,
            fmt_opt(r.norm_f_tilde),
            r.empirical_residual,
            fmt_opt(r.exact_residual),
            r.oracle_calls_cum,
            r.elapsed_seconds
        )
        .map_err(io_err(path))?;
    }
    f.flush().map_err(io_err(path))
}

pub const SUMMARY_HEADER: &str =
    "seed,algo,iters,anderson_steps,backtracks_total,oracle_calls,cpu_seconds,final_empirical_residual,status";

/// Summary CSV: one row per (seed, algorithm) followed by one mean row
/// per algorithm. CPU seconds are reported to 1 ms.
pub fn write_summary_csv(path: &Path, table: &SummaryTable) -> Result<()> {
    let mut f = create_file(path)?;
    writeln!(f, "{SUMMARY_HEADER}").map_err(io_err(path))?;
    for r in &table.rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{:.3},{},{}",
            r.seed,
            r.algo.as_str(),
            r.iters,
            r.anderson_steps,
            r.backtracks_total,
            r.oracle_calls,
            r.cpu_seconds,
            fmt_opt(r.final_empirical_residual),
            r.status.as_str()
        )
        .map_err(io_err(path))?;
    }
    for m in &table.means {
        writeln!(
            f,
            "mean,{},{},{},,{},{:.3},,",
            m.algo.as_str(),
            m.mean_iters,
            m.mean_anderson_steps,
            m.mean_oracle_calls,
            m.mean_cpu_seconds
        )
        .map_err(io_err(path))?;
    }
    f.flush().map_err(io_err(path))
}

/// Merge trace CSVs into one long-format table
/// (k, elapsed_seconds, residual, algo, seed) ready for plotting. The
/// algorithm and seed are recovered from the harness file-name convention
/// `trace_<family>_<algo>_seed<seed>.csv`.
pub fn emit_plot_data(trace_paths: &[PathBuf], out: &Path) -> Result<()> {
    let mut f = create_file(out)?;
    writeln!(f, "k,elapsed_seconds,residual,algo,seed").map_err(io_err(out))?;
    for path in trace_paths {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::ConfigError(format!("bad trace path {}", path.display())))?;
        let parts: Vec<&str> = stem.split('_').collect();
        let (algo, seed) = match parts.as_slice() {
            [.., algo, seed_tok] if seed_tok.starts_with("seed") => {
                (algo.to_string(), seed_tok.trim_start_matches("seed").to_string())
            }
            _ => {
                return Err(Error::ConfigError(format!(
                    "trace file name '{stem}' does not follow trace_<family>_<algo>_seed<seed>"
                )))
            }
        };
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::DataError(format!("empty trace {}", path.display())))?;
        let cols: Vec<&str> = header.split(',').collect();
        let col = |name: &str| -> Result<usize> {
            cols.iter()
                .position(|c| *c == name)
                .ok_or_else(|| Error::DataError(format!("trace {} lacks column {name}", path.display())))
        };
        let (ik, ie, ir) = (col("k")?, col("elapsed_seconds")?, col("empirical_residual")?);
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            writeln!(f, "{},{},{},{algo},{seed}", cells[ik], cells[ie], cells[ir])
                .map_err(io_err(out))?;
        }
    }
    f.flush().map_err(io_err(out))
}

// --- portfolio pipeline ----------------------------------------------------

/// Settings for a portfolio run. Stopping is iteration-count only; the
/// residual tolerance is pinned to zero.
#[derive(Debug, Clone)]
pub struct PortfolioRunSpec {
    pub frequency: Frequency,
    pub gamma: f64,
    pub upper_cap: f64,
    pub max_iters: u64,
    pub output_dir: PathBuf,
}

impl PortfolioRunSpec {
    pub fn new(frequency: Frequency, output_dir: PathBuf) -> Self {
        PortfolioRunSpec { frequency, gamma: 0.1, upper_cap: 0.2, max_iters: 2000, output_dir }
    }
}

/// Out-of-sample metrics schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PortfolioMetrics {
    pub data_set: String,
    pub n: usize,
    #[serde(rename = "T_in")]
    pub t_in: usize,
    #[serde(rename = "T_out")]
    pub t_out: usize,
    #[serde(rename = "SR_naive")]
    pub sr_naive: f64,
    #[serde(rename = "SR_solver")]
    pub sr_solver: f64,
    #[serde(rename = "AR_naive")]
    pub ar_naive: f64,
    #[serde(rename = "AR_solver")]
    pub ar_solver: f64,
    #[serde(rename = "CR_naive")]
    pub cr_naive: f64,
    #[serde(rename = "CR_solver")]
    pub cr_solver: f64,
    pub weights: Vec<f64>,
}

/// One row of the portfolio iteration trace: out-of-sample Sharpe ratio,
/// cumulative return, and mean-variance objective of the current weight
/// block.
#[derive(Debug, Clone, Serialize)]
pub struct PortfolioTraceRow {
    pub k: u64,
    pub sr: f64,
    pub cr: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct PortfolioReport {
    pub metrics: PortfolioMetrics,
    pub status: SolveStatus,
    pub iters: u64,
    pub trace: Vec<PortfolioTraceRow>,
}

/// Run the full pipeline on a price CSV: log returns, 9:1 split, windowed
/// moment estimates feeding the accelerated solver on the complementarity
/// form, then out-of-sample metrics for both the solver weights and the
/// naive portfolio. Writes `metrics.json`, `portfolio_trace.csv`, and the
/// solver trace.
pub fn run_portfolio(prices_path: &Path, spec: &PortfolioRunSpec) -> Result<PortfolioReport> {
    let prices = load_prices(prices_path, spec.frequency)?;
    let returns = log_returns(&prices);
    let split = split_returns(&returns)?;
    run_portfolio_on_returns(
        &split,
        prices_path.file_stem().and_then(|s| s.to_str()).unwrap_or("data").to_string(),
        spec,
    )
}

/// Pipeline body shared with tests that synthesize returns directly.
pub fn run_portfolio_on_returns(
    split: &crate::portfolio::ReturnsSplit,
    data_set: String,
    spec: &PortfolioRunSpec,
) -> Result<PortfolioReport> {
    let n = split.r_in.cols();
    let t_in = split.r_in.rows();
    let t_out = split.r_out.rows();
    let pf = PortfolioSpec::uniform_cap(n, spec.upper_cap)?;
    let upper = pf.upper.clone();

    // Full in-sample moments define the nominal problem; iterations use
    // the windowed estimates below.
    let full_lcp = build_lcp(&covariance(&split.r_in), &column_means(&split.r_in), &upper)?;
    let (m0, q0) = (full_lcp.matrix().clone(), full_lcp.q().to_vec());
    let problem = lcp_to_svi(&full_lcp, Some(Box::new(move |_s| (m0.clone(), q0.clone()))));

    let schedule = ScheduleSpec::quadratic(2, 2.0 + 1e-4, 1e-4)?.with_cap((t_in / 2).max(1))?;
    let cfg = SolverConfig::benchmark_defaults(
        spec.gamma,
        schedule,
        StopRule::new(0.0, spec.max_iters),
    )?;

    let mut x0 = naive_weights(n);
    x0.extend(vec![0.0; n + 2]);

    let r_in = &split.r_in;
    let r_out = &split.r_out;
    let mu_out = column_means(r_out);
    let sigma_out = covariance(r_out);
    let mut batches = |k: u64, s_k: usize| -> Result<(SampleBatch, SampleBatch)> {
        let w = windowed_moments(r_in, k, s_k)?;
        let lcp_xi = build_lcp(&w.sigma_xi, &w.rho_xi, &upper)?;
        let lcp_eta = build_lcp(&w.sigma_eta, &w.rho_eta, &upper)?;
        let to_batch = |l: LcpProblem| -> Result<SampleBatch> {
            SampleBatch::new(vec![Sample::new(LcpSample {
                m: std::sync::Arc::new(l.matrix().clone()),
                q: std::sync::Arc::new(l.q().to_vec()),
            })])
        };
        Ok((to_batch(lcp_xi)?, to_batch(lcp_eta)?))
    };

    let mut rows: Vec<PortfolioTraceRow> = Vec::new();
    let mut observer = |k: u64, x: &[f64]| {
        let w = &x[..n];
        let sr = sharpe(w, r_out).unwrap_or(f64::NAN);
        let cr = cumulative_and_annualized(w, r_out, spec.frequency)
            .map(|(cr, _)| cr)
            .unwrap_or(f64::NAN);
        let objective = 0.5 * dot(w, &sigma_out.mul_vec(w)) - dot(&mu_out, w);
        rows.push(PortfolioTraceRow { k, sr, cr, objective });
    };
    let report = solve_with(
        &problem,
        &cfg,
        &x0,
        Algorithm::AndersonSeg,
        &mut batches,
        Some(&mut observer),
    )?;

    let w_solver = report.x[..n].to_vec();
    let w_naive = naive_weights(n);
    let sr_solver = sharpe(&w_solver, r_out)?;
    let sr_naive = sharpe(&w_naive, r_out)?;
    let (cr_solver, ar_solver) = cumulative_and_annualized(&w_solver, r_out, spec.frequency)?;
    let (cr_naive, ar_naive) = cumulative_and_annualized(&w_naive, r_out, spec.frequency)?;
    let metrics = PortfolioMetrics {
        data_set,
        n,
        t_in,
        t_out,
        sr_naive,
        sr_solver,
        ar_naive,
        ar_solver,
        cr_naive,
        cr_solver,
        weights: w_solver,
    };

    std::fs::create_dir_all(&spec.output_dir).map_err(|source| Error::IoError {
        path: spec.output_dir.display().to_string(),
        source,
    })?;
    let metrics_path = spec.output_dir.join("metrics.json");
    let json = serde_json::to_string_pretty(&metrics)
        .map_err(|e| Error::DataError(format!("metrics serialization: {e}")))?;
    std::fs::write(&metrics_path, json + "\n").map_err(io_err(&metrics_path))?;

    let trace_path = spec.output_dir.join("portfolio_trace.csv");
    let mut f = create_file(&trace_path)?;
    writeln!(f, "k,sr,cr,objective").map_err(io_err(&trace_path))?;
    for r in &rows {
        writeln!(f, "{},{},{},{}", r.k, r.sr, r.cr, r.objective).map_err(io_err(&trace_path))?;
    }
    f.flush().map_err(io_err(&trace_path))?;
    write_trace_csv(&spec.output_dir.join("trace_portfolio_aseg_seed0.csv"), &report.trace)?;

    Ok(PortfolioReport {
        metrics,
        status: report.status,
        iters: report.trace.len() as u64,
        trace: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("svi_bench_{tag}_{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        dir
    }

    fn small_spec(tag: &str) -> ExperimentSpec {
        ExperimentSpec::new(
            Family::Complementarity,
            4,
            0.1,
            ScheduleSpec::linear(2, 5.0, 0.1).unwrap().with_cap(16).unwrap(),
            vec![1, 2],
            vec![Algorithm::AndersonSeg, Algorithm::Seg],
            StopRule::new(1e-2, 60),
            tmpdir(tag),
        )
    }

    #[test]
    fn experiment_writes_traces_and_summary() {
        let spec = small_spec("writes");
        let table = run_experiment(&spec).unwrap();
        assert_eq!(table.rows.len(), 4);
        assert!(spec.output_dir.join("summary.csv").exists());
        for seed in [1, 2] {
            for algo in ["aseg", "seg"] {
                assert!(spec
                    .output_dir
                    .join(format!("trace_example1_{algo}_seed{seed}.csv"))
                    .exists());
            }
        }
        // Summary means recomputed from rows.
        for algo in [Algorithm::AndersonSeg, Algorithm::Seg] {
            let mean = table.mean_for(algo).unwrap();
            let rows: Vec<&TrialRow> = table.rows.iter().filter(|r| r.algo == algo).collect();
            let expect = rows.iter().map(|r| r.iters as f64).sum::<f64>() / rows.len() as f64;
            assert_eq!(mean.mean_iters, expect);
        }
        let _ = std::fs::remove_dir_all(&spec.output_dir);
    }

    #[test]
    fn experiment_records_instance_provenance() {
        let mut spec = small_spec("provenance");
        spec.seeds = vec![5];
        spec.algorithms = vec![Algorithm::AndersonSeg];
        spec.stop = StopRule::new(1e-2, 5);
        run_experiment(&spec).unwrap();
        let text =
            std::fs::read_to_string(spec.output_dir.join("instance_example1_seed5.json")).unwrap();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(json["n"], 4);
        assert_eq!(json["root_seed"], 5);
        assert_eq!(json["stream_label"], "gen");
        assert!(json["b"]["data"].as_array().unwrap().len() == 16);
        let _ = std::fs::remove_dir_all(&spec.output_dir);
    }

    #[test]
    fn single_asset_portfolio_forces_unit_weight() {
        let dir = tmpdir("single_asset");
        std::fs::create_dir_all(&dir).unwrap();
        let mut rows = vec![vec![100.0]];
        for j in 1..24 {
            rows.push(vec![100.0 * (1.0 + 0.01 * ((j % 3) as f64 - 1.0)).powi(j)]);
        }
        let r = crate::portfolio::log_returns(
            &crate::portfolio::PriceMatrix::new(
                crate::linalg::Matrix::from_rows(&rows),
                vec!["only".into()],
                Frequency::Weekly,
            )
            .unwrap(),
        );
        let split = crate::portfolio::split_returns(&r).unwrap();
        let spec = PortfolioRunSpec {
            frequency: Frequency::Weekly,
            gamma: 0.1,
            upper_cap: 1.0,
            max_iters: 200,
            output_dir: dir.clone(),
        };
        let report = run_portfolio_on_returns(&split, "single".into(), &spec).unwrap();
        assert!((report.metrics.weights[0] - 1.0).abs() < 1e-3);
        assert!((report.metrics.sr_naive - report.metrics.sr_solver).abs() < 1e-9);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn zero_budget_summary_row() {
        let mut spec = small_spec("zerobudget");
        spec.stop = StopRule::new(1e-9, 0);
        spec.seeds = vec![1];
        spec.algorithms = vec![Algorithm::AndersonSeg];
        let table = run_experiment(&spec).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].iters, 0);
        assert_eq!(table.rows[0].status, SolveStatus::MaxIters);
        let _ = std::fs::remove_dir_all(&spec.output_dir);
    }

    #[test]
    fn reruns_are_identical_up_to_timing() {
        let spec = small_spec("rerun_a");
        let mut spec_b = spec.clone();
        spec_b.output_dir = tmpdir("rerun_b");
        run_experiment(&spec).unwrap();
        run_experiment(&spec_b).unwrap();
        for seed in [1, 2] {
            for algo in ["aseg", "seg"] {
                let name = format!("trace_example1_{algo}_seed{seed}.csv");
                let a = std::fs::read_to_string(spec.output_dir.join(&name)).unwrap();
                let b = std::fs::read_to_string(spec_b.output_dir.join(&name)).unwrap();
                let strip = |text: &str| -> Vec<String> {
                    text.lines()
                        .map(|l| l.rsplit_once(',').map(|(head, _time)| head.to_string()).unwrap())
                        .collect()
                };
                assert_eq!(strip(&a), strip(&b), "{name}");
            }
        }
        let _ = std::fs::remove_dir_all(&spec.output_dir);
        let _ = std::fs::remove_dir_all(&spec_b.output_dir);
    }

    #[test]
    fn anderson_count_matches_trace_and_theta() {
        let spec = small_spec("theta");
        let prepared = prepare_trial(&spec.family, spec.n, 1).unwrap();
        let cfg = spec.solver_config().unwrap();
        let report = solve_trial(&prepared, &cfg, Algorithm::AndersonSeg).unwrap();
        let from_trace =
            report.trace.iter().filter(|r| r.branch == crate::solver::Branch::Anderson).count()
                as u64;
        assert_eq!(report.anderson_steps(), from_trace);
        assert_eq!(report.theta - 1, from_trace);
        let _ = std::fs::remove_dir_all(&spec.output_dir);
    }

    #[test]
    fn plot_data_concatenates_traces() {
        let spec = small_spec("plotdata");
        run_experiment(&spec).unwrap();
        let paths: Vec<PathBuf> = ["aseg", "seg"]
            .iter()
            .map(|a| spec.output_dir.join(format!("trace_example1_{a}_seed1.csv")))
            .collect();
        let out = spec.output_dir.join("plot.csv");
        emit_plot_data(&paths, &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "k,elapsed_seconds,residual,algo,seed");
        let data_rows = lines.filter(|l| !l.is_empty()).count();
        let count_rows = |p: &PathBuf| -> usize {
            std::fs::read_to_string(p).unwrap().lines().skip(1).filter(|l| !l.is_empty()).count()
        };
        assert_eq!(data_rows, count_rows(&paths[0]) + count_rows(&paths[1]));
        assert!(text.lines().nth(1).unwrap().ends_with(",aseg,1"));
        let _ = std::fs::remove_dir_all(&spec.output_dir);
    }

    #[test]
    fn plot_data_missing_trace_is_io_error() {
        let out = tmpdir("plotmissing");
        std::fs::create_dir_all(&out).unwrap();
        let missing = out.join("trace_example1_aseg_seed9.csv");
        let result = emit_plot_data(&[missing], &out.join("plot.csv"));
        assert!(matches!(result, Err(Error::IoError { .. })));
        let _ = std::fs::remove_dir_all(&out);
    }
}
