//! Portfolio pipeline checks against the independent active-set oracle.

mod common;

use common::{max_abs_diff, qp_box_simplex_oracle};
use svi_core::linalg::Matrix;
use svi_core::portfolio::build_lcp;
use svi_core::problems::brute_force_lcp;
use svi_core::RngStream;

fn random_spd(n: usize, s: &mut RngStream) -> Matrix {
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a.set(i, j, s.draw_uniform(-1.0, 1.0).unwrap());
        }
    }
    // A A' + small ridge keeps the oracle's KKT systems well posed.
    let mut m = a.gram();
    for i in 0..n {
        m.set(i, i, m.get(i, i) + 0.1);
    }
    m
}

#[test]
fn complementarity_solutions_match_qp_minimizer() {
    // The w-block of the enumerated complementarity solution must agree
    // with the box-simplex QP minimizer for synthetic positive definite
    // covariances up to 1e-6.
    let mut s = RngStream::new_root(71).split("qp").unwrap();
    for trial in 0..12 {
        let n = 2 + trial % 3; // 2..=4 assets
        let sigma = random_spd(n, &mut s);
        let rho = s.uniform_vec(n, -0.2, 0.4).unwrap();
        let cap = 2.0 / n as f64;
        let a = vec![cap; n];
        let w_star = qp_box_simplex_oracle(&sigma, &rho, &a).expect("feasible QP");

        let lcp = build_lcp(&sigma, &rho, &a).unwrap();
        let solutions = brute_force_lcp(&lcp).unwrap();
        assert!(!solutions.is_empty(), "trial {trial}: no complementary solution");
        let best = solutions
            .iter()
            .map(|x| max_abs_diff(&x[..n], &w_star))
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 1e-6, "trial {trial}: w-block off by {best:.3e}");
    }
}

#[test]
fn solver_weights_satisfy_simplex_feasibility() {
    // At convergence the weight block obeys e'w = 1 and the box bounds
    // within the pipeline tolerances.
    let sigma = Matrix::from_rows(&[
        vec![0.8, 0.1, 0.0],
        vec![0.1, 1.2, -0.2],
        vec![0.0, -0.2, 2.0],
    ]);
    let rho = [0.25, 0.1, 0.05];
    let a = [0.7, 0.7, 0.7];
    let lcp = build_lcp(&sigma, &rho, &a).unwrap();
    let problem = svi_core::problems::lcp_to_svi(&lcp, None);
    let cfg = svi_core::SolverConfig::benchmark_defaults(
        1.0,
        svi_core::ScheduleSpec::linear(1, 5.0, 0.1).unwrap().with_cap(1).unwrap(),
        svi_core::StopRule::new(1e-9, 5000),
    )
    .unwrap();
    let report =
        svi_core::solve(&problem, &cfg, &[0.2; 8], &RngStream::new_root(4)).unwrap();
    assert_eq!(report.status, svi_core::SolveStatus::Converged);
    let w = &report.x[..3];
    let total: f64 = w.iter().sum();
    assert!((total - 1.0).abs() <= 1e-4, "e'w = {total}");
    for (i, wi) in w.iter().enumerate() {
        assert!(*wi >= -1e-6 && *wi <= a[i] + 1e-6, "w[{i}] = {wi}");
    }
    let w_star = qp_box_simplex_oracle(&sigma, &rho, &a).unwrap();
    assert!(max_abs_diff(w, &w_star) <= 1e-3);
}
