#![allow(dead_code)]

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use nfsa_core::geometry::build_usa;
use nfsa_core::optimizer::{build_diff_grid, sca_apo, ScaOptions};
use nfsa_core::rng::trial_rng;
use nfsa_core::ArrayLayout;

pub const LAMBDA: f64 = 0.01;
pub const B_MAX: f64 = 0.05;

/// Optimized 33-antenna layout on the p = 10 panel, computed once per binary.
pub fn nsa33() -> &'static ArrayLayout {
    static NSA: OnceLock<ArrayLayout> = OnceLock::new();
    NSA.get_or_init(|| {
        let tpl = build_usa(33, 10.0, LAMBDA).unwrap();
        let grid = build_diff_grid(64, 128, B_MAX).unwrap();
        sca_apo(&tpl, &grid, ScaOptions::default(), &mut trial_rng(0, 0))
            .unwrap()
            .0
    })
}

/// Minimizes `|x - v|^2` over the spacing polytope by enumerating active
/// sets of the reduced constraint list (the chain plus the two end bounds).
pub fn brute_force_projection(v: &[f64], s: f64, d: f64) -> Vec<f64> {
    let n = v.len();
    // Constraint rows c^T x >= r.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 1..n {
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        c[i - 1] = -1.0;
        rows.push((c, s));
    }
    let mut c = vec![0.0; n];
    c[0] = 1.0;
    rows.push((c, -d / 2.0));
    let mut c = vec![0.0; n];
    c[n - 1] = -1.0;
    rows.push((c, -d / 2.0));

    let feasible = |x: &[f64]| {
        rows.iter()
            .all(|(c, r)| c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() >= r - 1e-10)
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << rows.len()) {
        let active: Vec<&(Vec<f64>, f64)> = rows
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, r)| r)
            .collect();
        let m = active.len();
        if m > n {
            continue;
        }
        // KKT system [I A^T; A 0] [x; -mu] = [v; r].
        let dim = n + m;
        let mut k = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for i in 0..n {
            k[(i, i)] = 1.0;
            rhs[i] = v[i];
        }
        for (j, (c, r)) in active.iter().enumerate() {
            for i in 0..n {
                k[(i, n + j)] = c[i];
                k[(n + j, i)] = c[i];
            }
            rhs[n + j] = *r;
        }
        let Some(sol) = k.lu().solve(&rhs) else { continue };
        let x: Vec<f64> = sol.iter().take(n).copied().collect();
        if !feasible(&x) {
            continue;
        }
        let cost: f64 = x.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, x));
        }
    }
    best.unwrap().1
}
