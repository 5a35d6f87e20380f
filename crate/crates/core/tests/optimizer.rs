mod common;

use common::brute_force_projection;
use nalgebra::SymmetricEigen;
use nfsa_core::geometry::build_usa;
use nfsa_core::optimizer::{
    build_diff_grid, grad_h, hess_h, max_eigenvalue, objective_h, random_init, sca_apo, sca_apo_from, surrogate_min,
    ScaOptions,
};
use nfsa_core::projection::SpacingPolytope;
use nfsa_core::rng::trial_rng;
use proptest::prelude::*;
use rand::Rng;

const LAMBDA: f64 = 0.01;

fn panel(n: usize, p: f64) -> f64 {
    p * (n - 1) as f64 * LAMBDA / 2.0
}

fn fd_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let h = 1e-7 * x[i].abs().max(1.0);
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}

#[test]
fn gradient_and_hessian_match_finite_differences() {
    let grid = build_diff_grid(16, 17, 0.05).unwrap();
    let poly = SpacingPolytope::new(9, LAMBDA / 2.0, panel(9, 10.0)).unwrap();
    for trial in 0..5 {
        let x = random_init(&mut trial_rng(11, trial), &poly);
        let g = grad_h(&x, &grid, LAMBDA);
        let g_fd = fd_grad(&x, |v| objective_h(v, &grid, LAMBDA));
        assert!(rel_err(&g, &g_fd) <= 1e-5, "grad rel err {}", rel_err(&g, &g_fd));

        let hess = hess_h(&x, &grid, LAMBDA);
        assert_eq!(hess, hess.transpose());
        for j in 0..x.len() {
            let col_fd = fd_grad(&x, |v| grad_h(v, &grid, LAMBDA)[j]);
            let col: Vec<f64> = hess.row(j).iter().copied().collect();
            assert!(
                rel_err(&col, &col_fd) <= 1e-4,
                "hess row {j}: {}",
                rel_err(&col, &col_fd)
            );
        }
    }
}

#[test]
fn power_iteration_agrees_with_dense_eigensolver() {
    let grid = build_diff_grid(16, 17, 0.05).unwrap();
    let poly = SpacingPolytope::new(9, LAMBDA / 2.0, panel(9, 10.0)).unwrap();
    for trial in 0..5 {
        let x = random_init(&mut trial_rng(12, trial), &poly);
        let hess = hess_h(&x, &grid, LAMBDA);
        let dense = SymmetricEigen::new(hess.clone()).eigenvalues.max();
        let pi = max_eigenvalue(&hess, 1e-8);
        assert!((pi - dense).abs() <= 1e-6 * dense.abs().max(1.0), "{pi} vs {dense}");
    }
}

#[test]
fn gradient_is_antisymmetric_for_symmetric_layouts() {
    // With even T the angle samples pair up as theta <-> -theta except -2,
    // whose weight is zero, so h(x) = h(-x) and the gradient at a symmetric
    // layout satisfies g_{-n} = -g_n.
    let grid = build_diff_grid(16, 16, 0.05).unwrap();
    let half = [0.0071, 0.0183, 0.0342, 0.061];
    let mut x: Vec<f64> = half.iter().rev().map(|v| -v).collect();
    x.push(0.0);
    x.extend(half);
    let g = grad_h(&x, &grid, LAMBDA);
    let scale = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(scale > 1.0);
    for i in 0..x.len() {
        assert!((g[i] + g[x.len() - 1 - i]).abs() <= 1e-9 * scale, "{g:?}");
    }
}

#[test]
fn projection_matches_brute_force_oracle() {
    let mut rng = trial_rng(3, 0);
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let s = 0.005;
        let d = rng.random_range((n - 1) as f64 * s..0.05);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-0.04..0.04)).collect();
        let poly = SpacingPolytope::new(n, s, d).unwrap();
        let fast = poly.project(&v);
        let slow = brute_force_projection(&v, s, d);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-7, "{fast:?} vs {slow:?}");
        }
    }
}

#[test]
fn two_point_oracle_example() {
    let x = brute_force_projection(&[0.0, 0.0], 0.005, 10.0);
    assert!((x[0] + 0.0025).abs() < 1e-12 && (x[1] - 0.0025).abs() < 1e-12);
}

#[test]
fn surrogate_min_is_projected_step() {
    let poly = SpacingPolytope::new(3, 0.005, 0.1).unwrap();
    let x = [-0.02, 0.0, 0.02];
    let out = surrogate_min(&x, &[0.0, 0.0, 0.0], 2.0, &poly).unwrap();
    assert_eq!(out, x.to_vec());
    assert!(surrogate_min(&x, &[0.0; 3], 0.0, &poly).is_err());
}

#[test]
fn sca_descends_and_stays_feasible() {
    let tpl = build_usa(9, 10.0, LAMBDA).unwrap();
    let grid = build_diff_grid(16, 17, 0.05).unwrap();
    let opts = ScaOptions {
        iterations: 20,
        ..ScaOptions::default()
    };
    let (layout, st) = sca_apo(&tpl, &grid, opts, &mut trial_rng(5, 0)).unwrap();
    for w in st.objective_history.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
    let poly = SpacingPolytope::new(9, LAMBDA / 2.0, tpl.panel_length()).unwrap();
    assert!(poly.contains(layout.linear_positions().unwrap(), 1e-12));
    assert_eq!(st.chi_history.len(), 20);
    assert!(st.chi_history.iter().all(|c| *c > 0.0));
}

#[test]
fn sca_is_deterministic() {
    let grid = build_diff_grid(8, 9, 0.05).unwrap();
    let x0: Vec<f64> = (0..5).map(|i| -0.08 + 0.03 * i as f64).collect();
    let opts = ScaOptions {
        iterations: 5,
        ..ScaOptions::default()
    };
    let a = sca_apo_from(&x0, LAMBDA, 0.2, &grid, opts).unwrap().1;
    let b = sca_apo_from(&x0, LAMBDA, 0.2, &grid, opts).unwrap().1;
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_feasible_and_idempotent(
        v in prop::collection::vec(-0.1f64..0.1, 3..12),
        extra in 0.0f64..0.1,
    ) {
        let n = v.len();
        let d = (n - 1) as f64 * 0.005 + extra;
        let poly = SpacingPolytope::new(n, 0.005, d).unwrap();
        let x = poly.project(&v);
        prop_assert!(poly.contains(&x, 1e-12));
        let again = surrogate_min(&x, &vec![0.0; n], 1.0, &poly).unwrap();
        for (a, b) in x.iter().zip(&again) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn objective_terms_invariant_under_conjugation(
        b in -0.05f64..0.05, th in -2.0f64..2.0,
        x in prop::collection::vec(-0.2f64..0.2, 1..8),
    ) {
        use nfsa_core::optimizer::DiffGrid;
        let plus = DiffGrid::new(vec![b], vec![th], vec![1.0]).unwrap();
        let minus = DiffGrid::new(vec![-b], vec![-th], vec![1.0]).unwrap();
        let a = objective_h(&x, &plus, LAMBDA);
        let c = objective_h(&x, &minus, LAMBDA);
        prop_assert!((a - c).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn riemann_mass_of_b_density(s in 8usize..200) {
        let grid = build_diff_grid(s, 4, 0.05).unwrap();
        let mass: f64 = grid.b_samples().iter()
            .map(|&b| nfsa_core::optimizer::b_density(b, 0.05)).sum::<f64>() * 0.1 / s as f64;
        prop_assert!((mass - 1.0).abs() <= 2.0 / s as f64);
    }
}
