//! Off-grid refinement by iterative reweighting of a log-sum sparsity
//! penalty.
//!
//! Each outer iteration fixes the weights `D = diag(1 / (|gamma_l|^2 + delta))`,
//! moves the path parameters `(b_l, theta_l)` downhill on the reduced cost
//! `-c^H M^{-1} c` with `M = D / varpi + A^H A` and `c = A^H y`, then sets the
//! gains to `M^{-1} c` and prunes weak paths.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{steering_approx_at, SdaPoint};
use crate::error::{Error, Result};
use crate::estimation::{EstimateResult, EstimatedPath};
use crate::linalg::{hermitian_solve_vec, CMatrix, CVector};

/// Tuning of [`sda_isrce`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsrceParams {
    /// Log-sum smoothing `delta`.
    pub delta: f64,
    /// Data-fit weight `varpi`; `inf` drops the penalty from the gain solve.
    pub varpi: f64,
    /// Paths with `|gamma|^2 <= rho_relative * max |gamma|^2` are pruned.
    pub rho_relative: f64,
    /// Absolute pruning floor, applied together with `rho_relative`.
    pub rho_absolute: f64,
    /// Stop once `|gain change|^2 < mu`; also the initial gain level `sqrt(mu)`.
    pub mu: f64,
    pub max_outer: usize,
    /// Gradient steps per outer iteration.
    pub max_inner: usize,
}

impl Default for IsrceParams {
    fn default() -> Self {
        IsrceParams {
            delta: 1e-3,
            varpi: f64::INFINITY,
            rho_relative: 1e-2,
            rho_absolute: 0.0,
            mu: 1e-6,
            max_outer: 30,
            max_inner: 50,
        }
    }
}

impl IsrceParams {
    /// Defaults with `varpi = 1 / sigma2`. At this weight the log-sum term is
    /// strong enough to prune atoms that only explain noise.
    pub fn for_noise(sigma2: f64) -> Self {
        IsrceParams {
            varpi: if sigma2 > 0.0 { 1.0 / sigma2 } else { f64::INFINITY },
            ..IsrceParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::arg("delta", format!("must be positive, got {}", self.delta)));
        }
        if !(self.varpi > 0.0) {
            return Err(Error::arg("varpi", format!("must be positive, got {}", self.varpi)));
        }
        if !(self.rho_relative >= 0.0 && self.rho_absolute >= 0.0) {
            return Err(Error::arg("rho", "thresholds must be nonnegative"));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::arg("mu", format!("must be positive, got {}", self.mu)));
        }
        Ok(())
    }
}

/// Reduced cost and its ingredients at fixed weights.
struct Fit {
    value: f64,
    gains: CVector,
    atoms: CMatrix,
    regularized: bool,
}

struct Problem<'a> {
    y: &'a CVector,
    xs: &'a [f64],
    wavelength: f64,
    varpi: f64,
}

impl Problem<'_> {
    fn fit(&self, params: &[SdaPoint], dinv: &[f64]) -> Fit {
        let cols: Vec<CVector> = params
            .iter()
            .map(|&p| steering_approx_at(self.xs, self.wavelength, p))
            .collect();
        let atoms = CMatrix::from_columns(&cols);
        let mut m = atoms.ad_mul(&atoms);
        if self.varpi.is_finite() {
            for (l, d) in dinv.iter().enumerate() {
                m[(l, l)] += Complex64::new(d / self.varpi, 0.0);
            }
        }
        let c = atoms.ad_mul(self.y);
        let (gains, regularized) = hermitian_solve_vec(&m, &c);
        let value = -c.dotc(&gains).re;
        Fit {
            value,
            gains,
            atoms,
            regularized,
        }
    }

    /// Gradient with respect to `(b_l, theta_l)` and a diagonal
    /// Gauss-Newton scaling for each coordinate.
    fn gradient(&self, fit: &Fit) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
        let k = 2.0 * PI / self.wavelength;
        let resid = &fit.atoms * &fit.gains - self.y;
        let sum_x2: f64 = self.xs.iter().map(|x| (k * x).powi(2)).sum();
        let sum_x4: f64 = self.xs.iter().map(|x| (k * x * x).powi(2)).sum();
        let mut grad = Vec::with_capacity(fit.gains.len());
        let mut curv = Vec::with_capacity(fit.gains.len());
        for (l, &g) in fit.gains.iter().enumerate() {
            let col = fit.atoms.column(l);
            let mut db = Complex64::ZERO;
            let mut dt = Complex64::ZERO;
            for (i, &x) in self.xs.iter().enumerate() {
                let rc = resid[i].conj() * col[i];
                db += rc * Complex64::new(0.0, k * x * x);
                dt += rc * Complex64::new(0.0, -k * x);
            }
            grad.push([2.0 * (db * g).re, 2.0 * (dt * g).re]);
            let p = 2.0 * g.norm_sqr();
            curv.push([p * sum_x4, p * sum_x2]);
        }
        (grad, curv)
    }
}

/// Off-grid refinement of an on-grid estimate.
pub fn sda_isrce(
    y: &CVector,
    xs: &[f64],
    wavelength: f64,
    init: &EstimateResult,
    params: &IsrceParams,
) -> Result<EstimateResult> {
    params.validate()?;
    if init.paths.is_empty() {
        return Err(Error::arg("init", "initial estimate has no paths"));
    }
    if y.len() != xs.len() {
        return Err(Error::arg("y", "length does not match the layout"));
    }
    let prob = Problem {
        y,
        xs,
        wavelength,
        varpi: params.varpi,
    };
    let mut points: Vec<SdaPoint> = init.paths.iter().map(|p| p.sda).collect();
    let mut support = init.support.clone();
    support.resize(points.len(), usize::MAX);
    let l0 = points.len();
    let mut gains = CVector::from_element(l0, Complex64::new(params.mu.sqrt(), 0.0));
    let mut prev = CVector::zeros(l0);
    let mut iterations = 0;
    let mut regularized = false;

    while iterations < params.max_outer && (&gains - &prev).norm_squared() >= params.mu {
        iterations += 1;
        let dinv: Vec<f64> = gains.iter().map(|g| 1.0 / (g.norm_sqr() + params.delta)).collect();
        let mut fit = prob.fit(&points, &dinv);
        for _ in 0..params.max_inner {
            let (grad, curv) = prob.gradient(&fit);
            let cmax = curv.iter().flat_map(|c| c.iter().copied()).fold(0.0, f64::max);
            let floor = (1e-12 * cmax).max(f64::MIN_POSITIVE);
            let dir: Vec<[f64; 2]> = grad
                .iter()
                .zip(&curv)
                .map(|(g, c)| [-g[0] / c[0].max(floor), -g[1] / c[1].max(floor)])
                .collect();
            let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g[0] * d[0] + g[1] * d[1]).sum();
            if !(slope < 0.0) {
                break;
            }
            let mut step = 1.0;
            let mut moved = None;
            for _ in 0..40 {
                let trial: Vec<SdaPoint> = points
                    .iter()
                    .zip(&dir)
                    .map(|(p, d)| SdaPoint::new(p.b + step * d[0], p.theta + step * d[1]))
                    .collect();
                let f = prob.fit(&trial, &dinv);
                if f.value <= fit.value + 1e-4 * step * slope {
                    moved = Some((trial, f));
                    break;
                }
                step *= 0.5;
            }
            let Some((trial, f)) = moved else { break };
            let gain = fit.value - f.value;
            points = trial;
            fit = f;
            if gain <= 1e-12 * fit.value.abs() {
                break;
            }
        }
        if !fit.value.is_finite() || fit.gains.iter().any(|g| !g.re.is_finite() || !g.im.is_finite()) {
            return Err(Error::NonFinite("off-grid refinement objective"));
        }
        regularized |= fit.regularized;
        prev = gains;
        gains = fit.gains;

        let peak = gains.iter().map(|g| g.norm_sqr()).fold(0.0, f64::max);
        let rho = (params.rho_relative * peak).max(params.rho_absolute);
        let keep: Vec<usize> = (0..gains.len()).filter(|&l| gains[l].norm_sqr() > rho).collect();
        if keep.is_empty() {
            return Ok(EstimateResult {
                support: vec![],
                paths: vec![],
                channel: CVector::zeros(y.len()),
                iterations,
                residual_norms: vec![y.norm()],
                regularized,
                all_pruned: true,
            });
        }
        if keep.len() < gains.len() {
            points = keep.iter().map(|&l| points[l]).collect();
            support = keep.iter().map(|&l| support[l]).collect();
            gains = CVector::from_iterator(keep.len(), keep.iter().map(|&l| gains[l]));
            prev = CVector::from_iterator(keep.len(), keep.iter().map(|&l| prev[l]));
        }
    }

    let cols: Vec<CVector> = points.iter().map(|&p| steering_approx_at(xs, wavelength, p)).collect();
    let channel = CMatrix::from_columns(&cols) * &gains;
    let residual = (y - &channel).norm();
    Ok(EstimateResult {
        support,
        paths: points
            .iter()
            .zip(gains.iter())
            .map(|(&sda, &gain)| EstimatedPath { gain, sda })
            .collect(),
        channel,
        iterations,
        residual_norms: vec![residual],
        regularized,
        all_pruned: false,
    })
}

/// Reduced cost `-c^H (D / varpi + A^H A)^{-1} c` at path parameters
/// `points`, with `dinv` the diagonal of `D`.
pub fn reduced_cost(y: &CVector, xs: &[f64], wavelength: f64, points: &[SdaPoint], dinv: &[f64], varpi: f64) -> f64 {
    let prob = Problem {
        y,
        xs,
        wavelength,
        varpi,
    };
    prob.fit(points, dinv).value
}

/// Analytic gradient of [`reduced_cost`] as `[d/db, d/dtheta]` per path.
pub fn reduced_gradient(
    y: &CVector,
    xs: &[f64],
    wavelength: f64,
    points: &[SdaPoint],
    dinv: &[f64],
    varpi: f64,
) -> Vec<[f64; 2]> {
    let prob = Problem {
        y,
        xs,
        wavelength,
        varpi,
    };
    prob.gradient(&prob.fit(points, dinv)).0
}
