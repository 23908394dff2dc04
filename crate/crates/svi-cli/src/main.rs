//! Command-line harness around the solver toolkit.
//!
//! Subcommands: `bench` runs the synthetic benchmark families across
//! seeds and writes trace/summary CSVs; `portfolio` runs the price-CSV
//! pipeline; `lcp` solves a complementarity problem from a JSON file;
//! `plot-data` merges trace CSVs into one long-format table. The worker
//! count for multi-trial runs is capped by the `SVI_THREADS` environment
//! variable.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use svi_core::bench::{
    emit_plot_data, run_experiment, run_portfolio, ExperimentSpec, Family, PortfolioRunSpec,
};
use svi_core::portfolio::Frequency;
use svi_core::problems::{lcp_to_svi, LcpProblem};
use svi_core::solver::{Algorithm, ScheduleKind, ScheduleSpec, SolverConfig, StopRule};
use svi_core::{Error, Matrix, RngStream};

#[derive(Parser)]
#[command(name = "svi", version, about = "Stochastic variational inequality solver benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run a benchmark family across seeds and both algorithms.
    Bench(BenchArgs),
    /// Run the mean-variance portfolio pipeline on a price CSV.
    Portfolio(PortfolioArgs),
    /// Solve a linear complementarity problem from a JSON file.
    Lcp(LcpArgs),
    /// Merge trace CSVs into a long-format plot table.
    PlotData(PlotDataArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Example1,
    Example2,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Quad,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Aseg,
    Seg,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Aseg => Algorithm::AndersonSeg,
            AlgoArg::Seg => Algorithm::Seg,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FreqArg {
    Weekly,
    Daily,
}

impl From<FreqArg> for Frequency {
    fn from(f: FreqArg) -> Self {
        match f {
            FreqArg::Weekly => Frequency::Weekly,
            FreqArg::Daily => Frequency::Daily,
        }
    }
}

/// Optional JSON config; command-line flags override its fields.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchFileConfig {
    n: Option<usize>,
    gamma: Option<f64>,
    schedule: Option<String>,
    n_factor: Option<usize>,
    lambda: Option<f64>,
    b: Option<f64>,
    cap: Option<usize>,
    seeds: Option<usize>,
    seed: Option<u64>,
    tol: Option<f64>,
    max_iters: Option<u64>,
    nu: Option<f64>,
    tau: Option<f64>,
    rho: Option<f64>,
    mu: Option<f64>,
    safeguard_cap: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Problem family.
    #[arg(value_enum)]
    family: FamilyArg,
    /// Problem dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Initial/maximal step size in (0, 1].
    #[arg(long)]
    gamma: Option<f64>,
    /// Batch-size schedule kind.
    #[arg(long, value_enum)]
    schedule: Option<ScheduleArg>,
    /// Schedule factor N.
    #[arg(long)]
    n_factor: Option<usize>,
    /// Schedule offset lambda.
    #[arg(long)]
    lambda: Option<f64>,
    /// Schedule exponent b.
    #[arg(long)]
    b: Option<f64>,
    /// Optional upper bound on the batch size.
    #[arg(long)]
    cap: Option<usize>,
    /// Number of seeds (root seeds seed, seed+1, ...).
    #[arg(long)]
    seeds: Option<usize>,
    /// Base root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Residual stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration budget.
    #[arg(long)]
    max_iters: Option<u64>,
    /// Algorithms to run.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [AlgoArg::Aseg, AlgoArg::Seg])]
    algos: Vec<AlgoArg>,
    /// Acceleration gate scale nu (0 disables acceleration).
    #[arg(long)]
    nu: Option<f64>,
    /// Gate decay exponent tau.
    #[arg(long)]
    tau: Option<f64>,
    /// Backtracking factor rho.
    #[arg(long)]
    rho: Option<f64>,
    /// Line-search constant mu.
    #[arg(long)]
    mu: Option<f64>,
    /// Mixing coefficient cap M.
    #[arg(long)]
    safeguard_cap: Option<f64>,
    /// Optional JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PortfolioArgs {
    /// Price CSV: header of tickers, one row of closing prices per period.
    #[arg(long)]
    prices: PathBuf,
    /// Sampling frequency (sets the annualization factor).
    #[arg(long, value_enum)]
    freq: FreqArg,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Initial/maximal step size.
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    /// Per-asset weight cap.
    #[arg(long, default_value_t = 0.2)]
    upper: f64,
    /// Iteration budget (stopping is iteration-count only).
    #[arg(long, default_value_t = 2000)]
    max_iters: u64,
}

#[derive(Args)]
struct LcpArgs {
    /// JSON file with fields "m" (row-major nested arrays) and "q".
    #[arg(long)]
    file: PathBuf,
    /// Algorithm to run.
    #[arg(long, value_enum, default_value_t = AlgoArg::Aseg)]
    algo: AlgoArg,
    /// Initial/maximal step size.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Residual stopping tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Iteration budget.
    #[arg(long, default_value_t = 2000)]
    max_iters: u64,
    /// Root seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Optional directory for the trace CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotDataArgs {
    /// Trace CSVs produced by `bench` (trace_<family>_<algo>_seed<k>.csv).
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Deserialize)]
struct LcpFile {
    m: Vec<Vec<f64>>,
    q: Vec<f64>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(args) => bench(args),
        Command::Portfolio(args) => portfolio(args),
        Command::Lcp(args) => lcp(args),
        Command::PlotData(args) => emit_plot_data(&args.traces, &args.out),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn bench(args: BenchArgs) -> svi_core::Result<()> {
    let file: BenchFileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::IoError {
                path: path.display().to_string(),
                source,
            })?;
            serde_json::from_str(&text)
                .map_err(|e| Error::ConfigError(format!("config {}: {e}", path.display())))?
        }
        None => BenchFileConfig::default(),
    };

    let schedule_kind = match args.schedule {
        Some(ScheduleArg::Quad) => ScheduleKind::Quadratic,
        Some(ScheduleArg::Linear) => ScheduleKind::Linear,
        None => match file.schedule.as_deref() {
            Some("quad") => ScheduleKind::Quadratic,
            Some("linear") | None => ScheduleKind::Linear,
            Some(other) => {
                return Err(Error::ConfigError(format!("unknown schedule '{other}'")));
            }
        },
    };
    // Benchmark defaults per schedule kind.
    let (def_factor, def_lambda, def_b) = match schedule_kind {
        ScheduleKind::Quadratic => (2, 2.0 + 1e-4, 1e-4),
        ScheduleKind::Linear => (20, 5.0, 0.1),
    };
    let schedule = ScheduleSpec::new(
        schedule_kind,
        args.n_factor.or(file.n_factor).unwrap_or(def_factor),
        args.lambda.or(file.lambda).unwrap_or(def_lambda),
        args.b.or(file.b).unwrap_or(def_b),
        args.cap.or(file.cap),
    )?;

    let family = match args.family {
        FamilyArg::Example1 => Family::Complementarity,
        FamilyArg::Example2 => Family::FractionalQuadratic,
    };
    let base_seed = args.seed.or(file.seed).unwrap_or(42);
    let seed_count = args.seeds.or(file.seeds).unwrap_or(10);
    let seeds: Vec<u64> = (0..seed_count as u64).map(|i| base_seed + i).collect();
    let stop = StopRule::new(
        args.tol.or(file.tol).unwrap_or(1e-2),
        args.max_iters.or(file.max_iters).unwrap_or(200),
    );
    let mut spec = ExperimentSpec::new(
        family,
        args.n.or(file.n).unwrap_or(10),
        args.gamma.or(file.gamma).unwrap_or(0.1),
        schedule,
        seeds,
        args.algos.into_iter().map(Algorithm::from).collect(),
        stop,
        args.out,
    );
    spec.nu = args.nu.or(file.nu).unwrap_or(spec.nu);
    spec.tau = args.tau.or(file.tau).unwrap_or(spec.tau);
    spec.rho = args.rho.or(file.rho).unwrap_or(spec.rho);
    spec.mu = args.mu.or(file.mu).unwrap_or(spec.mu);
    spec.safeguard_cap = args.safeguard_cap.or(file.safeguard_cap).unwrap_or(spec.safeguard_cap);

    let table = run_experiment(&spec)?;
    println!("seed,algo,iters,anderson_steps,status");
    for row in &table.rows {
        println!(
            "{},{},{},{},{}",
            row.seed,
            row.algo.as_str(),
            row.iters,
            row.anderson_steps,
            row.status.as_str()
        );
    }
    for mean in &table.means {
        println!(
            "mean {}: iters {:.1} (anderson {:.1}), cpu {:.3}s",
            mean.algo.as_str(),
            mean.mean_iters,
            mean.mean_anderson_steps,
            mean.mean_cpu_seconds
        );
    }
    println!("wrote {}", spec.output_dir.display());
    Ok(())
}

fn portfolio(args: PortfolioArgs) -> svi_core::Result<()> {
    let spec = PortfolioRunSpec {
        frequency: args.freq.into(),
        gamma: args.gamma,
        upper_cap: args.upper,
        max_iters: args.max_iters,
        output_dir: args.out,
    };
    let report = run_portfolio(&args.prices, &spec)?;
    let m = &report.metrics;
    println!("data set {} (n = {}, T_in = {}, T_out = {})", m.data_set, m.n, m.t_in, m.t_out);
    println!("SR  naive {:.6}  solver {:.6}", m.sr_naive, m.sr_solver);
    println!("AR  naive {:.6e}  solver {:.6e}", m.ar_naive, m.ar_solver);
    println!("CR  naive {:.6e}  solver {:.6e}", m.cr_naive, m.cr_solver);
    println!("wrote {}", spec.output_dir.display());
    Ok(())
}

fn lcp(args: LcpArgs) -> svi_core::Result<()> {
    let text = std::fs::read_to_string(&args.file).map_err(|source| Error::IoError {
        path: args.file.display().to_string(),
        source,
    })?;
    let parsed: LcpFile = serde_json::from_str(&text)
        .map_err(|e| Error::ConfigError(format!("lcp file {}: {e}", args.file.display())))?;
    let rows = parsed.m.len();
    let lcp = LcpProblem::new(Matrix::from_rows(&parsed.m), parsed.q)?;
    let problem = lcp_to_svi(&lcp, None);
    let schedule = ScheduleSpec::linear(1, 5.0, 0.1)?.with_cap(1)?;
    let cfg = SolverConfig::benchmark_defaults(
        args.gamma,
        schedule,
        StopRule::new(args.tol, args.max_iters),
    )?;
    let root = RngStream::new_root(args.seed);
    let x0 = vec![0.0; rows];
    let report = match Algorithm::from(args.algo) {
        Algorithm::AndersonSeg => svi_core::solve(&problem, &cfg, &x0, &root)?,
        Algorithm::Seg => svi_core::solve_seg(&problem, &cfg, &x0, &root)?,
    };
    println!("status: {}", report.status.as_str());
    println!("iterations: {}", report.trace.len());
    if let Some(r) = report.final_residual {
        println!("residual: {r:.3e}");
    }
    println!("x: {:?}", report.x);
    if let Some(dir) = args.out {
        std::fs::create_dir_all(&dir).map_err(|source| Error::IoError {
            path: dir.display().to_string(),
            source,
        })?;
        let algo = Algorithm::from(args.algo);
        let path = dir.join(format!("trace_lcp_{}_seed{}.csv", algo.as_str(), args.seed));
        svi_core::bench::write_trace_csv(&path, &report.trace)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
