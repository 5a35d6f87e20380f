//! Greedy on-grid estimation (orthogonal matching pursuit).

use crate::error::{Error, Result};
use crate::estimation::{EstimateResult, EstimatedPath};
use crate::linalg::{least_squares, norm_sqr, CMatrix, CVector};

use super::dictionary::Dictionary;

/// Orthogonal matching pursuit over `dict` with `max_paths` iterations.
///
/// Each step picks the unused column with the largest `|w_d^H r|^2` (first
/// index on ties) and refits all selected gains by least squares.
pub fn sda_omp(y: &CVector, dict: &Dictionary, max_paths: usize) -> Result<EstimateResult> {
    let n = y.len();
    if dict.atoms().nrows() != n {
        return Err(Error::arg(
            "y",
            format!(
                "length {n} does not match the dictionary ({} rows)",
                dict.atoms().nrows()
            ),
        ));
    }
    if max_paths == 0 || max_paths > n || max_paths > dict.len() {
        return Err(Error::arg(
            "max_paths",
            format!("must lie in 1..={}, got {max_paths}", n.min(dict.len())),
        ));
    }
    let w = dict.atoms();
    let mut support: Vec<usize> = Vec::with_capacity(max_paths);
    let mut used = vec![false; dict.len()];
    let mut residual = y.clone();
    let mut residual_norms = vec![norm_sqr(y).sqrt()];
    let mut gains = CVector::zeros(0);
    let mut regularized = false;

    for _ in 0..max_paths {
        let corr = w.ad_mul(&residual);
        let mut best = None;
        let mut best_val = f64::NEG_INFINITY;
        for (d, c) in corr.iter().enumerate() {
            let v = c.norm_sqr();
            if !used[d] && v > best_val {
                best_val = v;
                best = Some(d);
            }
        }
        let Some(d) = best else { break };
        if !best_val.is_finite() {
            return Err(Error::NonFinite("orthogonal matching pursuit"));
        }
        used[d] = true;
        support.push(d);
        let a = select_columns(w, &support);
        let (g, reg) = least_squares(&a, y);
        regularized |= reg;
        residual = y - &a * &g;
        residual_norms.push(norm_sqr(&residual).sqrt());
        gains = g;
    }

    let a = select_columns(w, &support);
    let channel = &a * &gains;
    let paths = support
        .iter()
        .zip(gains.iter())
        .map(|(&d, &gain)| EstimatedPath {
            gain,
            sda: dict.point(d),
        })
        .collect();
    Ok(EstimateResult {
        iterations: support.len(),
        support,
        paths,
        channel,
        residual_norms,
        regularized,
        all_pruned: false,
    })
}

pub(crate) fn select_columns(w: &CMatrix, cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(w.nrows(), cols.len(), |i, j| w[(i, cols[j])])
}
