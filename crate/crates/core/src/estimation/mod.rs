//! Channel estimation from a single pilot observation `y = h + noise`.

mod dictionary;
mod isrce;
mod omp;

use num_complex::Complex64;
use serde::Serialize;

pub use dictionary::{angle_grid, build_dictionary, farfield_dictionary, min_grid, Dictionary, MinGrid};
pub use isrce::{reduced_cost, reduced_gradient, sda_isrce, IsrceParams};
pub use omp::sda_omp;

use crate::channel::{steering_exact, PathParam, SdaPoint};
use crate::error::{Error, Result};
use crate::geometry::ArrayLayout;
use crate::linalg::{least_squares, norm_sqr, CMatrix, CVector};

/// NMSE floor reported for exact estimates.
pub const NMSE_FLOOR_DB: f64 = -120.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatedPath {
    pub gain: Complex64,
    pub sda: SdaPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    /// Dictionary columns behind the paths, in selection order.
    pub support: Vec<usize>,
    pub paths: Vec<EstimatedPath>,
    pub channel: CVector,
    pub iterations: usize,
    /// Residual norm before the first step and after each step.
    pub residual_norms: Vec<f64>,
    /// A Gram system needed the ridge fallback.
    pub regularized: bool,
    /// Every path was pruned; `channel` is zero.
    pub all_pruned: bool,
}

/// On-grid estimation with the far-field (`b = 0`) dictionary of `t` angles.
pub fn farfield_omp(y: &CVector, layout: &ArrayLayout, max_paths: usize, t: usize) -> Result<EstimateResult> {
    sda_omp(y, &farfield_dictionary(layout, t)?, max_paths)
}

/// Unstructured least squares: with an identity observation the estimate is
/// the observation itself.
pub fn ls_estimate(y: &CVector) -> CVector {
    y.clone()
}

/// Least-squares gains on the exact steering vectors of the true paths.
pub fn genie_ls(y: &CVector, layout: &ArrayLayout, true_paths: &[PathParam]) -> Result<EstimateResult> {
    if true_paths.is_empty() {
        return Err(Error::arg("true_paths", "need at least one path"));
    }
    if y.len() != layout.len() {
        return Err(Error::arg("y", "length does not match the layout"));
    }
    let cols: Vec<CVector> = true_paths
        .iter()
        .map(|p| steering_exact(layout, p.distance, p.theta_physical))
        .collect();
    let a = CMatrix::from_columns(&cols);
    let (gains, regularized) = least_squares(&a, y);
    let channel = &a * &gains;
    Ok(EstimateResult {
        support: (0..true_paths.len()).collect(),
        paths: true_paths
            .iter()
            .zip(gains.iter())
            .map(|(p, &gain)| EstimatedPath { gain, sda: p.sda })
            .collect(),
        residual_norms: vec![y.norm(), (y - &channel).norm()],
        channel,
        iterations: 1,
        regularized,
        all_pruned: false,
    })
}

/// `|estimate - truth|^2 / |truth|^2`.
pub fn nmse_ratio(estimate: &CVector, truth: &CVector) -> f64 {
    norm_sqr(&(estimate - truth)) / norm_sqr(truth)
}

/// A ratio in dB, floored at [`NMSE_FLOOR_DB`].
pub fn ratio_db(ratio: f64) -> f64 {
    if ratio > 0.0 {
        (10.0 * ratio.log10()).max(NMSE_FLOOR_DB)
    } else {
        NMSE_FLOOR_DB
    }
}

/// NMSE of one estimate in dB.
pub fn nmse(estimate: &CVector, truth: &CVector) -> f64 {
    ratio_db(nmse_ratio(estimate, truth))
}

/// Mean NMSE over trials: ratios are averaged before taking the log.
pub fn aggregate_nmse_db(ratios: &[f64]) -> f64 {
    if ratios.is_empty() {
        return f64::NAN;
    }
    ratio_db(ratios.iter().sum::<f64>() / ratios.len() as f64)
}
