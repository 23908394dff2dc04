//! Mean-variance portfolio pipeline: price ingestion, log returns,
//! train/test split, LCP assembly from moment estimates, windowed moments
//! for the stochastic solver, and out-of-sample metrics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::problems::LcpProblem;

/// Sampling frequency of the price series; fixes the annualization factor
/// (50 periods for weekly data, 250 for daily).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frequency {
    Weekly,
    Daily,
}

impl Frequency {
    pub fn periods_per_year(&self) -> f64 {
        match self {
            Frequency::Weekly => 50.0,
            Frequency::Daily => 250.0,
        }
    }
}

impl std::str::FromStr for Frequency {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weekly" => Ok(Frequency::Weekly),
            "daily" => Ok(Frequency::Daily),
            other => Err(Error::ConfigError(format!("unknown frequency '{other}'"))),
        }
    }
}

/// Validated T x n matrix of positive closing prices.
#[derive(Debug, Clone)]
pub struct PriceMatrix {
    prices: Matrix,
    tickers: Vec<String>,
    frequency: Frequency,
}

impl PriceMatrix {
    pub fn new(prices: Matrix, tickers: Vec<String>, frequency: Frequency) -> Result<Self> {
        if prices.rows() < 3 {
            return Err(Error::DataError(format!(
                "need at least 3 price rows, got {}",
                prices.rows()
            )));
        }
        if tickers.len() != prices.cols() {
            return Err(Error::DimensionMismatch { expected: prices.cols(), got: tickers.len() });
        }
        for i in 0..prices.rows() {
            for j in 0..prices.cols() {
                let v = prices.get(i, j);
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::DataError(format!(
                        "nonpositive price {v} at row {} column {}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(PriceMatrix { prices, tickers, frequency })
    }

    pub fn prices(&self) -> &Matrix {
        &self.prices
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn asset_count(&self) -> usize {
        self.prices.cols()
    }
}

/// Load a price CSV: header row of tickers, one row of positive numeric
/// closing prices per period.
pub fn load_prices(path: &Path, frequency: Frequency) -> Result<PriceMatrix> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::IoError {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::DataError("empty price file".into()))?;
    let tickers: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let n = tickers.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n {
            return Err(Error::DataError(format!(
                "row {} has {} cells, expected {n}",
                idx + 1,
                cells.len()
            )));
        }
        let mut row = Vec::with_capacity(n);
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::DataError(format!("unparsable price '{}' at row {} column {}", cell, idx + 1, j + 1))
            })?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::DataError(format!(
                    "nonpositive price {v} at row {} column {}",
                    idx + 1,
                    j + 1
                )));
            }
            row.push(v);
        }
        rows.push(row);
    }
    PriceMatrix::new(Matrix::from_rows(&rows), tickers, frequency)
}

/// Log returns r[j, i] = ln(P[j+1, i] / P[j, i]); (T-1) x n.
pub fn log_returns(p: &PriceMatrix) -> Matrix {
    let t = p.prices().rows();
    let n = p.prices().cols();
    let mut r = Matrix::zeros(t - 1, n);
    for j in 0..t - 1 {
        for i in 0..n {
            r.set(j, i, (p.prices().get(j + 1, i) / p.prices().get(j, i)).ln());
        }
    }
    r
}

/// In-sample / out-of-sample return split with
/// T_in = 2 * ceil(0.9 (T-1) / 2 - 1) (always even) and the remainder out
/// of sample.
#[derive(Debug, Clone)]
pub struct ReturnsSplit {
    pub r_in: Matrix,
    pub r_out: Matrix,
}

pub fn split_returns(r: &Matrix) -> Result<ReturnsSplit> {
    let rows = r.rows();
    if rows < 4 {
        return Err(Error::DataError(format!("need at least 4 return rows to split, got {rows}")));
    }
    let t_in = 2 * ((0.9 * rows as f64 / 2.0 - 1.0).ceil() as usize);
    if t_in < 2 || t_in >= rows {
        return Err(Error::DataError(format!("degenerate split T_in={t_in} of {rows} rows")));
    }
    let n = r.cols();
    let mut r_in = Matrix::zeros(t_in, n);
    let mut r_out = Matrix::zeros(rows - t_in, n);
    for j in 0..t_in {
        for i in 0..n {
            r_in.set(j, i, r.get(j, i));
        }
    }
    for j in t_in..rows {
        for i in 0..n {
            r_out.set(j - t_in, i, r.get(j, i));
        }
    }
    Ok(ReturnsSplit { r_in, r_out })
}

/// Column means of a returns matrix.
pub fn column_means(r: &Matrix) -> Vec<f64> {
    let rows = r.rows();
    let mut mu = vec![0.0; r.cols()];
    for j in 0..rows {
        for (m, v) in mu.iter_mut().zip(r.row(j)) {
            *m += v;
        }
    }
    for m in mu.iter_mut() {
        *m /= rows as f64;
    }
    mu
}

/// Sample covariance with divisor (rows - 1); a single row yields the
/// zero matrix.
#[allow(clippy::needless_range_loop)]
pub fn covariance(r: &Matrix) -> Matrix {
    let (rows, cols) = (r.rows(), r.cols());
    let mu = column_means(r);
    let mut sigma = Matrix::zeros(cols, cols);
    if rows < 2 {
        return sigma;
    }
    for j in 0..rows {
        for a in 0..cols {
            let da = r.get(j, a) - mu[a];
            for b in a..cols {
                let v = sigma.get(a, b) + da * (r.get(j, b) - mu[b]);
                sigma.set(a, b, v);
            }
        }
    }
    let inv = 1.0 / (rows - 1) as f64;
    for a in 0..cols {
        for b in a..cols {
            let v = sigma.get(a, b) * inv;
            sigma.set(a, b, v);
            sigma.set(b, a, v);
        }
    }
    sigma
}

/// Moment estimates for one iteration: the xi-family from the fixed
/// window starting at row T_in/2 (1-based, inclusive of both endpoints of
/// the slice, S_k + 1 rows), the eta-family from the first S_k rows.
#[derive(Debug, Clone)]
pub struct WindowMoments {
    pub rho_xi: Vec<f64>,
    pub sigma_xi: Matrix,
    pub rho_eta: Vec<f64>,
    pub sigma_eta: Matrix,
}

pub fn windowed_moments(r_in: &Matrix, _k: u64, s_k: usize) -> Result<WindowMoments> {
    let t_in = r_in.rows();
    let half = t_in / 2;
    if s_k > half {
        return Err(Error::WindowOverrun { requested: s_k, half });
    }
    if s_k == 0 {
        return Err(Error::DataError("window length must be at least 1".into()));
    }
    let n = r_in.cols();
    let slice = |lo: usize, hi: usize| -> Matrix {
        // 0-based, exclusive upper bound.
        let mut m = Matrix::zeros(hi - lo, n);
        for j in lo..hi {
            for i in 0..n {
                m.set(j - lo, i, r_in.get(j, i));
            }
        }
        m
    };
    let xi = slice(half - 1, (half + s_k).min(t_in));
    let eta = slice(0, s_k);
    Ok(WindowMoments {
        rho_xi: column_means(&xi),
        sigma_xi: covariance(&xi),
        rho_eta: column_means(&eta),
        sigma_eta: covariance(&eta),
    })
}

/// Assemble the complementarity form of the mean-variance program
/// min 0.5 w'Sigma w - rho'w over {0 <= w <= a, e'w = 1}:
///
///   M = [ Sigma  -C' ]      C = [  e' ]      q = [ -rho ]
///       [   C     O  ]          [ -e' ]          [  -1  ]
///                               [ -I  ]          [   1  ]
///                                                [   a  ]
pub fn build_lcp(sigma: &Matrix, rho: &[f64], a: &[f64]) -> Result<LcpProblem> {
    let n = rho.len();
    if sigma.rows() != n || sigma.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: sigma.rows() });
    }
    if a.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.len() });
    }
    let asym = sigma.add(&sigma.transpose().scale(-1.0)).frobenius_norm();
    if asym > 1e-10 {
        return Err(Error::InvalidCovariance(asym));
    }
    let side = 2 * n + 2;
    let mut m = Matrix::zeros(side, side);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, sigma.get(i, j));
        }
    }
    // C rows: e', -e', then -I.
    let c_row = |r: usize, j: usize| -> f64 {
        match r {
            0 => 1.0,
            1 => -1.0,
            _ => {
                if r - 2 == j {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    };
    for r in 0..n + 2 {
        for j in 0..n {
            m.set(n + r, j, c_row(r, j)); // C block
            m.set(j, n + r, -c_row(r, j)); // -C' block
        }
    }
    let mut q = Vec::with_capacity(side);
    q.extend(rho.iter().map(|v| -v));
    q.push(-1.0);
    q.push(1.0);
    q.extend_from_slice(a);
    LcpProblem::new(m, q)
}

/// Sharpe ratio rho_out'w / sqrt(w'Sigma_out w) on the out-of-sample
/// returns.
pub fn sharpe(w: &[f64], r_out: &Matrix) -> Result<f64> {
    if w.len() != r_out.cols() {
        return Err(Error::DimensionMismatch { expected: r_out.cols(), got: w.len() });
    }
    let mu = column_means(r_out);
    let sigma = covariance(r_out);
    let var = dot(w, &sigma.mul_vec(w));
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    Ok(dot(&mu, w) / var.sqrt())
}

/// Cumulative return (sum of per-period portfolio log returns) and the
/// annualized return CR / T_out * periods-per-year.
pub fn cumulative_and_annualized(w: &[f64], r_out: &Matrix, frequency: Frequency) -> Result<(f64, f64)> {
    if w.len() != r_out.cols() {
        return Err(Error::DimensionMismatch { expected: r_out.cols(), got: w.len() });
    }
    let mut cr = 0.0;
    for j in 0..r_out.rows() {
        cr += dot(r_out.row(j), w);
    }
    let ar = cr / r_out.rows() as f64 * frequency.periods_per_year();
    Ok((cr, ar))
}

/// The evenly weighted portfolio.
pub fn naive_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Upper-bounded simplex spec for the weight vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PortfolioSpec {
    pub upper: Vec<f64>,
    pub n: usize,
}

impl PortfolioSpec {
    pub fn uniform_cap(n: usize, cap: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension);
        }
        if !(cap > 0.0) {
            return Err(Error::ConfigError(format!("weight cap must be positive, got {cap}")));
        }
        if cap * (n as f64) < 1.0 {
            return Err(Error::ConfigError(format!(
                "cap {cap} with {n} assets cannot reach total weight 1"
            )));
        }
        Ok(PortfolioSpec { upper: vec![cap; n], n })
    }
}
