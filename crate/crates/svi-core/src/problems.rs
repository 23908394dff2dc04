//! Synthetic problem generators, the LCP-to-SVI bridge, and a brute-force
//! LCP oracle for small-instance ground truth.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, gauss_legendre, solve_dense, Matrix};
use crate::operators::{Sample, StochasticProblem};
use crate::rng::RngStream;
use crate::sets::FeasibleSet;

/// Linear complementarity problem: find x >= 0 with Mx + q >= 0 and
/// x'(Mx + q) = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcpProblem {
    m: Matrix,
    q: Vec<f64>,
}

impl LcpProblem {
    pub fn new(m: Matrix, q: Vec<f64>) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::DimensionMismatch { expected: m.rows(), got: m.cols() });
        }
        if q.len() != m.rows() {
            return Err(Error::DimensionMismatch { expected: m.rows(), got: q.len() });
        }
        Ok(LcpProblem { m, q })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn side(&self) -> usize {
        self.q.len()
    }
}

// --- stochastic complementarity generator -------------------------------

/// One realization of the complementarity problem's random element,
/// stored as the contiguous blocks [d | a | y | q].
pub struct ScpSample {
    n: usize,
    data: Vec<f64>,
}

impl ScpSample {
    pub fn d(&self) -> &[f64] {
        &self.data[..self.n]
    }

    pub fn a(&self) -> &[f64] {
        &self.data[self.n..2 * self.n]
    }

    pub fn y_diag(&self) -> &[f64] {
        &self.data[2 * self.n..3 * self.n]
    }

    pub fn q(&self) -> &[f64] {
        &self.data[3 * self.n..]
    }
}

/// A generated stochastic complementarity instance. The instance is fully
/// described by its skew-symmetric mixing matrix and the provenance of the
/// stream that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScpInstance {
    pub n: usize,
    pub b: Matrix,
    pub root_seed: u64,
    pub stream_label: String,
}

impl ScpInstance {
    /// Per-sample Lipschitz bound ||B + Y|| + max_i d_i a_i.
    pub fn sample_lipschitz(&self, s: &ScpSample) -> f64 {
        let mut m = self.b.clone();
        for (i, y) in s.y_diag().iter().enumerate() {
            m.set(i, i, m.get(i, i) + y);
        }
        let dmax = s
            .d()
            .iter()
            .zip(s.a())
            .map(|(d, a)| d * a)
            .fold(0.0f64, f64::max);
        m.spectral_norm() + dmax
    }

    /// Instantiate the stochastic problem on the nonnegative orthant:
    /// T(xi, x)_i = d_i * atan(a_i x_i) + ((B + Y)x)_i + q_i, with the mean
    /// operator H(x) = Dbar(x) + (B + I)x evaluated by Gauss-Legendre
    /// quadrature of E[atan(a x_i)] (E[d] = 1/2, E[Y] = I, E[q] = 0).
    pub fn problem(&self) -> StochasticProblem {
        let n = self.n;
        let b_apply = self.b.clone();
        let b_batch = self.b.clone();
        let b_mean = self.b.clone();
        let (nodes, weights) = gauss_legendre(64);
        // Map the rule to [0, 1].
        let nodes: Vec<f64> = nodes.iter().map(|t| 0.5 * (t + 1.0)).collect();
        let weights: Vec<f64> = weights.iter().map(|w| 0.5 * w).collect();
        StochasticProblem::new(
            FeasibleSet::NonnegativeOrthant { dim: n },
            move |stream: &mut RngStream| {
                let mut data = Vec::with_capacity(4 * n);
                for _ in 0..2 * n {
                    data.push(stream.uniform01());
                }
                for _ in 0..n {
                    data.push(2.0 * stream.uniform01());
                }
                for _ in 0..n {
                    data.push(-3.0 + 6.0 * stream.uniform01());
                }
                Sample::new(ScpSample { n, data })
            },
            move |s: &Sample, x: &[f64]| {
                let s = s.downcast_ref::<ScpSample>().expect("complementarity sample");
                let (d, a, y, q) = (s.d(), s.a(), s.y_diag(), s.q());
                let mut out = b_apply.mul_vec(x);
                for i in 0..x.len() {
                    out[i] += d[i] * (a[i] * x[i]).atan() + y[i] * x[i] + q[i];
                }
                out
            },
        )
        // The linear mixing term is shared by every sample; fuse the rest.
        .with_batch_operator(move |batch, x: &[f64]| {
            let mut acc = vec![0.0; x.len()];
            for smp in batch.samples() {
                let s = smp.downcast_ref::<ScpSample>().expect("complementarity sample");
                let (d, a, y, q) = (s.d(), s.a(), s.y_diag(), s.q());
                for i in 0..x.len() {
                    acc[i] += d[i] * (a[i] * x[i]).atan() + y[i] * x[i] + q[i];
                }
            }
            let inv = 1.0 / batch.size() as f64;
            let mut out = b_batch.mul_vec(x);
            for i in 0..x.len() {
                out[i] += acc[i] * inv;
            }
            out
        })
        .with_exact_mean(move |x: &[f64]| {
            let mut out = b_mean.mul_vec(x);
            for i in 0..x.len() {
                let mean_atan: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(a, w)| w * (a * x[i]).atan())
                    .sum();
                out[i] += 0.5 * mean_atan + x[i];
            }
            out
        })
    }
}

/// Generate a stochastic complementarity instance of dimension `n`. The
/// skew-symmetric matrix is built once from `stream` as (A - A')/2 with
/// the entries of A uniform on (0, 5).
pub fn gen_scp(n: usize, stream: &mut RngStream) -> Result<ScpInstance> {
    if n == 0 {
        return Err(Error::InvalidDimension);
    }
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a.set(i, j, stream.draw_uniform(0.0, 5.0)?);
        }
    }
    let b = a.add(&a.transpose().scale(-1.0)).scale(0.5);
    Ok(ScpInstance {
        n,
        b,
        root_seed: stream.root_seed(),
        stream_label: stream.label_path(),
    })
}

// --- fractional quadratic generator --------------------------------------

/// One realization for the fractional quadratic problem: the symmetric
/// quadratic-form matrix (with the realized perturbation folded in) and
/// the realized linear coefficient c + cbar.
pub struct FracSample {
    pub quad: Matrix,
    pub cc: Vec<f64>,
}

/// A generated fractional convex quadratic instance on the box [0, 4e]:
/// minimize E[f(xi, x) / g(x)] with
/// f(xi, x) = 0.5 x'(0.025 U'U + 0.025 (||U'U||_F / ||V||_F) V) x
///          + 0.5 ((c + cbar)'x + 4n)^2
/// and g(x) = r'x + d + 4n. No closed-form mean operator exists; analysis
/// uses empirical residuals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FracInstance {
    pub n: usize,
    pub u: Matrix,
    pub c: Vec<f64>,
    pub r: Vec<f64>,
    pub d: f64,
    pub root_seed: u64,
    pub stream_label: String,
}

impl FracInstance {
    /// The per-sample operator is the quotient-rule gradient of
    /// f(xi, .) / g at fixed xi.
    pub fn problem(&self) -> StochasticProblem {
        let n = self.n;
        let utu = self.u.transpose().mul_mat(&self.u);
        let utu_fro = utu.frobenius_norm();
        let c = self.c.clone();
        let r = self.r.clone();
        let d = self.d;
        StochasticProblem::new(
            FeasibleSet::cube(n, 4.0).expect("n >= 1"),
            move |stream: &mut RngStream| {
                let mut v = Matrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        v.set(i, j, stream.draw_normal(0.0, 1.0).expect("valid range"));
                    }
                }
                let scale = utu_fro / v.frobenius_norm();
                let quad = utu.add(&v.symmetric_part().scale(scale)).scale(0.025);
                let cbar = stream.uniform_vec(n, 0.0, 1.0).expect("valid range");
                let cc = c.iter().zip(&cbar).map(|(a, b)| a + b).collect();
                Sample::new(FracSample { quad, cc })
            },
            move |s: &Sample, x: &[f64]| {
                let s = s.downcast_ref::<FracSample>().expect("fractional sample");
                let fourn = 4.0 * n as f64;
                let qx = s.quad.mul_vec(x);
                let lin = dot(&s.cc, x) + fourn;
                let f = 0.5 * dot(x, &qx) + 0.5 * lin * lin;
                // g >= d + 4n on the box, but mixing steps may evaluate the
                // operator at infeasible points; the quotient rule stays
                // defined for any nonzero g and the next projection pulls
                // the iterate back.
                let g = dot(&r, x) + d + fourn;
                debug_assert!(g != 0.0);
                let inv_g2 = 1.0 / (g * g);
                (0..x.len())
                    .map(|i| ((qx[i] + lin * s.cc[i]) * g - f * r[i]) * inv_g2)
                    .collect()
            },
        )
    }

    /// f(xi, x) / g(x) for a realized sample; the finite-difference oracle
    /// in the tests differentiates this scalar directly.
    pub fn objective_at(&self, s: &FracSample, x: &[f64]) -> f64 {
        let fourn = 4.0 * self.n as f64;
        let qx = s.quad.mul_vec(x);
        let lin = dot(&s.cc, x) + fourn;
        let f = 0.5 * dot(x, &qx) + 0.5 * lin * lin;
        let g = dot(&self.r, x) + self.d + fourn;
        f / g
    }
}

/// Generate a fractional quadratic instance of dimension `n`: U and c are
/// standard normal, r and d uniform on (0, 5), all drawn once from
/// `stream`.
pub fn gen_fractional(n: usize, stream: &mut RngStream) -> Result<FracInstance> {
    if n == 0 {
        return Err(Error::InvalidDimension);
    }
    let mut u = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            u.set(i, j, stream.draw_normal(0.0, 1.0)?);
        }
    }
    let c = stream.normal_vec(n, 0.0, 1.0)?;
    let r = stream.uniform_vec(n, 0.0, 5.0)?;
    let d = stream.draw_uniform(0.0, 5.0)?;
    Ok(FracInstance {
        n,
        u,
        c,
        r,
        d,
        root_seed: stream.root_seed(),
        stream_label: stream.label_path(),
    })
}

// --- LCP bridge -----------------------------------------------------------

/// Realized affine operator for LCP-backed problems.
pub struct LcpSample {
    pub m: Arc<Matrix>,
    pub q: Arc<Vec<f64>>,
}

/// Per-draw supplier of a realized (M, q) pair.
pub type LcpNoise = Box<dyn Fn(&mut RngStream) -> (Matrix, Vec<f64>) + Send + Sync>;

/// View an LCP as the variational inequality with H(x) = Mx + q on the
/// nonnegative orthant. Without `noise` the operator is deterministic and
/// the exact mean is available; with it, each sample realizes its own
/// affine pair.
pub fn lcp_to_svi(lcp: &LcpProblem, noise: Option<LcpNoise>) -> StochasticProblem {
    let dim = lcp.side();
    let set = FeasibleSet::NonnegativeOrthant { dim };
    let apply = |s: &Sample, x: &[f64]| {
        let s = s.downcast_ref::<LcpSample>().expect("affine sample");
        let mut out = s.m.mul_vec(x);
        for (o, q) in out.iter_mut().zip(s.q.iter()) {
            *o += q;
        }
        out
    };
    match noise {
        None => {
            let m = Arc::new(lcp.matrix().clone());
            let q = Arc::new(lcp.q().to_vec());
            let (m_mean, q_mean) = (m.clone(), q.clone());
            StochasticProblem::new(
                set,
                move |_stream: &mut RngStream| Sample::new(LcpSample { m: m.clone(), q: q.clone() }),
                apply,
            )
            .with_exact_mean(move |x: &[f64]| {
                let mut out = m_mean.mul_vec(x);
                for (o, q) in out.iter_mut().zip(q_mean.iter()) {
                    *o += q;
                }
                out
            })
        }
        Some(noise) => StochasticProblem::new(
            set,
            move |stream: &mut RngStream| {
                let (m, q) = noise(stream);
                Sample::new(LcpSample { m: Arc::new(m), q: Arc::new(q) })
            },
            apply,
        ),
    }
}

/// Ground-truth LCP solutions by enumerating complementary index sets.
/// For every subset of indices, fix x_i = 0 off the subset and solve the
/// active linear system; keep solutions feasible within 1e-9 slack and
/// deduplicate within 1e-8. Singular active systems contribute nothing.
pub fn brute_force_lcp(lcp: &LcpProblem) -> Result<Vec<Vec<f64>>> {
    let m = lcp.side();
    if m > 16 {
        return Err(Error::TooLargeForEnumeration { max: 16, got: m });
    }
    let mut solutions: Vec<Vec<f64>> = Vec::new();
    for mask in 0u32..(1u32 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let x = if active.is_empty() {
            vec![0.0; m]
        } else {
            let k = active.len();
            let mut sub = Matrix::zeros(k, k);
            let mut rhs = vec![0.0; k];
            for (ri, &i) in active.iter().enumerate() {
                rhs[ri] = -lcp.q()[i];
                for (ci, &j) in active.iter().enumerate() {
                    sub.set(ri, ci, lcp.matrix().get(i, j));
                }
            }
            match solve_dense(&sub, &rhs) {
                Some(xa) => {
                    let mut x = vec![0.0; m];
                    for (ri, &i) in active.iter().enumerate() {
                        x[i] = xa[ri];
                    }
                    x
                }
                None => continue,
            }
        };
        let mut w = lcp.matrix().mul_vec(&x);
        for (wi, qi) in w.iter_mut().zip(lcp.q()) {
            *wi += qi;
        }
        if x.iter().any(|&v| v < -1e-9) || w.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let duplicate = solutions.iter().any(|s| {
            s.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max) <= 1e-8
        });
        if !duplicate {
            solutions.push(x);
        }
    }
    Ok(solutions)
}
