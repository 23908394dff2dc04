//! Shared test oracles, independent of the solver paths they check.

use svi_core::linalg::{dot, solve_dense, Matrix};

/// Minimize 0.5 w'Sigma w - rho'w over {0 <= w <= a, e'w = 1} by
/// enumerating active sets: every coordinate is pinned to its lower
/// bound, pinned to its upper bound, or free, and the free block is
/// solved through the equality-constrained KKT system. Returns the
/// feasible KKT point with the smallest objective (unique minimizer for
/// positive definite Sigma). Intended for n small enough that 3^n
/// enumeration is trivial.
pub fn qp_box_simplex_oracle(sigma: &Matrix, rho: &[f64], a: &[f64]) -> Option<Vec<f64>> {
    let n = rho.len();
    assert_eq!(sigma.rows(), n);
    assert_eq!(a.len(), n);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut assignment = vec![0u8; n]; // 0 = lower, 1 = upper, 2 = free
    loop {
        if let Some(w) = solve_assignment(sigma, rho, a, &assignment) {
            let obj = 0.5 * dot(&w, &sigma.mul_vec(&w)) - dot(rho, &w);
            if best.as_ref().map(|(b, _)| obj < *b - 1e-15).unwrap_or(true) {
                best = Some((obj, w));
            }
        }
        // Next ternary assignment.
        let mut i = 0;
        loop {
            if i == n {
                return best.map(|(_, w)| w);
            }
            assignment[i] += 1;
            if assignment[i] <= 2 {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
    }
}

fn solve_assignment(sigma: &Matrix, rho: &[f64], a: &[f64], assignment: &[u8]) -> Option<Vec<f64>> {
    let n = rho.len();
    let free: Vec<usize> = (0..n).filter(|&i| assignment[i] == 2).collect();
    let mut w = vec![0.0; n];
    let mut fixed_sum = 0.0;
    for i in 0..n {
        if assignment[i] == 1 {
            w[i] = a[i];
            fixed_sum += a[i];
        }
    }
    let lambda;
    if free.is_empty() {
        if (fixed_sum - 1.0).abs() > 1e-9 {
            return None;
        }
        // lambda is only constrained by the sign conditions: >= -g0_i at
        // lower bounds, <= -g0_i at upper bounds. Pick any point of the
        // interval when it is nonempty.
        let grad0 = sigma.mul_vec(&w);
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..n {
            let g0 = grad0[i] - rho[i];
            if assignment[i] == 0 {
                lo = lo.max(-g0);
            } else {
                hi = hi.min(-g0);
            }
        }
        if lo > hi {
            return None;
        }
        lambda = if lo.is_finite() { lo } else { hi };
    } else {
        // KKT: [Sigma_FF  e][w_F    ]   [rho_F - Sigma_FX w_X]
        //      [e'        0][lambda ] = [1 - fixed_sum       ]
        let m = free.len();
        let mut kkt = Matrix::zeros(m + 1, m + 1);
        let mut rhs = vec![0.0; m + 1];
        for (ri, &i) in free.iter().enumerate() {
            for (ci, &j) in free.iter().enumerate() {
                kkt.set(ri, ci, sigma.get(i, j));
            }
            kkt.set(ri, m, 1.0);
            kkt.set(m, ri, 1.0);
            let fixed_part: f64 =
                (0..n).filter(|j| assignment[*j] == 1).map(|j| sigma.get(i, j) * a[j]).sum();
            rhs[ri] = rho[i] - fixed_part;
        }
        rhs[m] = 1.0 - fixed_sum;
        let sol = solve_dense(&kkt, &rhs)?;
        for (ri, &i) in free.iter().enumerate() {
            w[i] = sol[ri];
        }
        lambda = sol[m];
    }
    // Primal feasibility of the free block.
    for &i in &free {
        if w[i] < -1e-12 || w[i] > a[i] + 1e-12 {
            return None;
        }
    }
    // Dual feasibility: g_i = (Sigma w - rho)_i + lambda must be >= 0 at
    // the lower bound and <= 0 at the upper bound.
    let grad = sigma.mul_vec(&w);
    for i in 0..n {
        let g = grad[i] - rho[i] + lambda;
        match assignment[i] {
            0 if g < -1e-9 => return None,
            1 if g > 1e-9 => return None,
            _ => {}
        }
    }
    Some(w)
}

#[allow(dead_code)]
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
