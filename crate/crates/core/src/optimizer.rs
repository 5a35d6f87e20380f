//! Antenna position optimization by successive convex approximation.
//!
//! The objective `h(x)` is the expected squared correlation between two
//! simplified steering vectors whose surrogate-distance and angle differences
//! are drawn from triangular densities, quantized on a [`DiffGrid`]. Each
//! iteration minimizes the quadratic upper model
//! `grad^T (x - x_prev) + chi/2 |x - x_prev|^2` over the spacing polytope,
//! which is a Euclidean projection.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ArrayLayout;
use crate::linalg::cis;
use crate::projection::SpacingPolytope;

/// Quantized distribution of steering-vector parameter differences.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffGrid {
    b_samples: Vec<f64>,
    theta_samples: Vec<f64>,
    /// Row-major `S x T`: `weights[s * T + t] = f(b_s) g(theta_t)`.
    weights: Vec<f64>,
}

/// Triangular density of the difference of two uniforms on `[0, b_max]`.
pub fn b_density(b: f64, b_max: f64) -> f64 {
    (1.0 / b_max - b.abs() / (b_max * b_max)).max(0.0)
}

/// Triangular density of the difference of two uniforms on `[-1, 1]`.
pub fn theta_density(theta: f64) -> f64 {
    (0.5 - theta.abs() / 4.0).max(0.0)
}

/// `S x T` grid with `b_s = -b_max + 2 (s-1) b_max / S` and
/// `theta_t = -2 + 4 (t-1) / T`, left endpoints included.
pub fn build_diff_grid(s: usize, t: usize, b_max: f64) -> Result<DiffGrid> {
    if s < 2 {
        return Err(Error::arg("S", format!("need at least 2 samples, got {s}")));
    }
    if t < 2 {
        return Err(Error::arg("T", format!("need at least 2 samples, got {t}")));
    }
    if !(b_max.is_finite() && b_max > 0.0) {
        return Err(Error::arg("b_max", format!("must be positive, got {b_max}")));
    }
    let b_samples: Vec<f64> = (0..s).map(|i| -b_max + 2.0 * i as f64 * b_max / s as f64).collect();
    let theta_samples: Vec<f64> = (0..t).map(|i| -2.0 + 4.0 * i as f64 / t as f64).collect();
    let weights = b_samples
        .iter()
        .flat_map(|&b| {
            let fb = b_density(b, b_max);
            theta_samples.iter().map(move |&th| fb * theta_density(th))
        })
        .collect();
    Ok(DiffGrid {
        b_samples,
        theta_samples,
        weights,
    })
}

impl DiffGrid {
    /// Grid with explicit samples and row-major `S x T` weights.
    pub fn new(b_samples: Vec<f64>, theta_samples: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if b_samples.is_empty() || theta_samples.is_empty() {
            return Err(Error::arg("grid", "empty sample set"));
        }
        if weights.len() != b_samples.len() * theta_samples.len() {
            return Err(Error::arg(
                "weights",
                format!(
                    "expected {} entries, got {}",
                    b_samples.len() * theta_samples.len(),
                    weights.len()
                ),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::arg("weights", "must be finite and nonnegative"));
        }
        Ok(DiffGrid {
            b_samples,
            theta_samples,
            weights,
        })
    }

    pub fn b_samples(&self) -> &[f64] {
        &self.b_samples
    }

    pub fn theta_samples(&self) -> &[f64] {
        &self.theta_samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, s: usize, t: usize) -> f64 {
        self.weights[s * self.theta_samples.len() + t]
    }

    fn scale(&self) -> f64 {
        1.0 / (self.b_samples.len() * self.theta_samples.len()) as f64
    }
}

/// Phase tables `exp(j 2pi b_s x_n^2 / lambda)` and `exp(j 2pi theta_t x_n / lambda)`.
struct Tables {
    quad: Vec<Vec<Complex64>>,
    lin: Vec<Vec<Complex64>>,
}

impl Tables {
    fn new(x: &[f64], grid: &DiffGrid, wavelength: f64) -> Self {
        let k = 2.0 * PI / wavelength;
        let quad = grid
            .b_samples
            .iter()
            .map(|&b| x.iter().map(|&xn| cis(k * b * xn * xn)).collect())
            .collect();
        let lin = grid
            .theta_samples
            .iter()
            .map(|&th| x.iter().map(|&xn| cis(k * th * xn)).collect())
            .collect();
        Tables { quad, lin }
    }
}

/// Runs `body(s, t, phasors, sum)` over the grid, in parallel over `s`,
/// and reduces the per-row results in order.
fn grid_reduce<A, F>(x: &[f64], grid: &DiffGrid, wavelength: f64, zero: A, body: F) -> A
where
    A: Clone + Send + Sync + std::ops::AddAssign,
    F: Fn(&mut A, usize, usize, &[Complex64], Complex64) + Sync,
{
    let tables = Tables::new(x, grid, wavelength);
    let n = x.len();
    let rows: Vec<A> = (0..grid.b_samples.len())
        .into_par_iter()
        .map(|s| {
            let mut acc = zero.clone();
            let mut e = vec![Complex64::ZERO; n];
            for t in 0..grid.theta_samples.len() {
                if grid.weight(s, t) == 0.0 {
                    continue;
                }
                let mut sum = Complex64::ZERO;
                for (i, ei) in e.iter_mut().enumerate() {
                    *ei = tables.quad[s][i] * tables.lin[t][i];
                    sum += *ei;
                }
                body(&mut acc, s, t, &e, sum);
            }
            acc
        })
        .collect();
    let mut total = zero;
    for r in rows {
        total += r;
    }
    total
}

/// `h(x) = 1/(ST) sum_{s,t} w_{t,s} |sum_n exp(j 2pi (b_s x_n^2 + theta_t x_n) / lambda)|^2`.
pub fn objective_h(x: &[f64], grid: &DiffGrid, wavelength: f64) -> f64 {
    let total = grid_reduce(x, grid, wavelength, 0.0, |acc, s, t, _, sum| {
        *acc += grid.weight(s, t) * sum.norm_sqr();
    });
    total * grid.scale()
}

/// Analytic gradient of [`objective_h`].
pub fn grad_h(x: &[f64], grid: &DiffGrid, wavelength: f64) -> Vec<f64> {
    let k = 2.0 * PI / wavelength;
    let n = x.len();
    let total = grid_reduce(x, grid, wavelength, VecSum(vec![0.0; n]), |acc, s, t, e, sum| {
        let w = grid.weight(s, t);
        let (b, th) = (grid.b_samples[s], grid.theta_samples[t]);
        for i in 0..n {
            let a = k * (2.0 * b * x[i] + th);
            acc.0[i] += w * 2.0 * a * (e[i].conj() * sum).im;
        }
    });
    total.0.into_iter().map(|g| g * grid.scale()).collect()
}

/// Analytic Hessian of [`objective_h`].
///
/// With `phi_n = 2pi (b x_n^2 + theta x_n) / lambda`, `a_n = d phi_n / d x_n`
/// and `S = sum_v exp(j phi_v)`, each grid term contributes
/// `2 w a_m a_n cos(phi_m - phi_n)` off the diagonal and
/// `2 w [ (4 pi b / lambda) Im(e^{-j phi_n} S) - a_n^2 (Re(e^{-j phi_n} S) - 1) ]`
/// on it.
pub fn hess_h(x: &[f64], grid: &DiffGrid, wavelength: f64) -> DMatrix<f64> {
    let k = 2.0 * PI / wavelength;
    let n = x.len();
    let total = grid_reduce(
        x,
        grid,
        wavelength,
        MatSum(DMatrix::zeros(n, n)),
        |acc, s, t, e, sum| {
            let w = grid.weight(s, t);
            let (b, th) = (grid.b_samples[s], grid.theta_samples[t]);
            let a: Vec<f64> = x.iter().map(|&xi| k * (2.0 * b * xi + th)).collect();
            for i in 0..n {
                let proj = e[i].conj() * sum;
                acc.0[(i, i)] += 2.0 * w * (2.0 * k * b * proj.im - a[i] * a[i] * (proj.re - 1.0));
                for j in 0..i {
                    let v = 2.0 * w * a[i] * a[j] * (e[i].conj() * e[j]).re;
                    acc.0[(i, j)] += v;
                    acc.0[(j, i)] += v;
                }
            }
        },
    );
    total.0 * grid.scale()
}

#[derive(Clone)]
struct VecSum(Vec<f64>);

impl std::ops::AddAssign for VecSum {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

#[derive(Clone)]
struct MatSum(DMatrix<f64>);

impl std::ops::AddAssign for MatSum {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

/// Largest algebraic eigenvalue of a symmetric matrix by power iteration.
///
/// A first pass finds the dominant eigenvalue; when it is negative a second
/// pass on `H - lambda_dom I` (positive semidefinite) recovers the top end.
pub fn max_eigenvalue(h: &DMatrix<f64>, tol: f64) -> f64 {
    let dom = power_iteration(h, tol);
    if dom >= 0.0 {
        return dom;
    }
    let shifted = h - DMatrix::identity(h.nrows(), h.ncols()) * dom;
    power_iteration(&shifted, tol) + dom
}

fn power_iteration(h: &DMatrix<f64>, tol: f64) -> f64 {
    let n = h.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + 0.01 * (i as f64 + 1.0).sqrt());
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..20_000 {
        let hv = h * &v;
        let rq = v.dot(&hv);
        let norm = hv.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = hv / norm;
        // Sign flips mark a negative dominant eigenvalue; compare up to sign.
        let settled = (rq - est).abs() <= tol * rq.abs().max(1e-300) && (next.dot(&v).abs() - 1.0).abs() <= tol;
        v = next;
        est = rq;
        if settled {
            break;
        }
    }
    est
}

/// Minimizer of `grad^T (x - x_prev) + chi/2 |x - x_prev|^2` over `poly`,
/// i.e. the projection of `x_prev - grad / chi`.
pub fn surrogate_min(x_prev: &[f64], grad: &[f64], chi: f64, poly: &SpacingPolytope) -> Result<Vec<f64>> {
    if !(chi.is_finite() && chi > 0.0) {
        return Err(Error::arg("chi", format!("must be positive, got {chi}")));
    }
    if x_prev.len() != poly.n || grad.len() != poly.n {
        return Err(Error::arg("x", "dimension does not match the polytope"));
    }
    let v: Vec<f64> = x_prev.iter().zip(grad).map(|(x, g)| x - g / chi).collect();
    Ok(poly.project(&v))
}

/// Trace of an optimization run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerState {
    pub x: Vec<f64>,
    pub iteration: usize,
    /// `h` at `x^(0), ..., x^(Q)`.
    pub objective_history: Vec<f64>,
    /// Curvature used at iterations `1..=Q`.
    pub chi_history: Vec<f64>,
}

/// Tuning of [`sca_apo`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    pub iterations: usize,
    /// Relative tolerance of the power iteration.
    pub eig_tol: f64,
    /// Floor on `chi` relative to the mean absolute Hessian diagonal.
    pub chi_floor: f64,
    /// Curvature doublings tried before a step is rejected.
    pub max_doublings: usize,
}

impl Default for ScaOptions {
    fn default() -> Self {
        ScaOptions {
            iterations: 100,
            eig_tol: 1e-8,
            chi_floor: 1e-6,
            max_doublings: 60,
        }
    }
}

/// Sorted uniform draw over the panel, projected onto the spacing polytope.
pub fn random_init<R: Rng + ?Sized>(rng: &mut R, poly: &SpacingPolytope) -> Vec<f64> {
    let half = poly.panel_length / 2.0;
    let mut x: Vec<f64> = (0..poly.n).map(|_| rng.random_range(-half..=half)).collect();
    x.sort_by(f64::total_cmp);
    poly.project(&x)
}

/// Optimizes the positions of `template.len()` antennas on the panel of
/// `template` from a random start.
pub fn sca_apo<R: Rng + ?Sized>(
    template: &ArrayLayout,
    grid: &DiffGrid,
    opts: ScaOptions,
    rng: &mut R,
) -> Result<(ArrayLayout, OptimizerState)> {
    let poly = SpacingPolytope::new(template.len(), template.wavelength() / 2.0, template.panel_length())?;
    let x0 = random_init(rng, &poly);
    sca_apo_from(&x0, template.wavelength(), template.panel_length(), grid, opts)
}

/// [`sca_apo`] from a given start (projected first if infeasible).
pub fn sca_apo_from(
    x0: &[f64],
    wavelength: f64,
    panel_length: f64,
    grid: &DiffGrid,
    opts: ScaOptions,
) -> Result<(ArrayLayout, OptimizerState)> {
    let poly = SpacingPolytope::new(x0.len(), wavelength / 2.0, panel_length)?;
    let mut x = poly.project(x0);
    let mut h_prev = objective_h(&x, grid, wavelength);
    let mut state = OptimizerState {
        x: x.clone(),
        iteration: 0,
        objective_history: vec![h_prev],
        chi_history: Vec::with_capacity(opts.iterations),
    };
    for q in 1..=opts.iterations {
        let grad = grad_h(&x, grid, wavelength);
        let hess = hess_h(&x, grid, wavelength);
        let diag_scale = hess.diagonal().iter().map(|d| d.abs()).sum::<f64>() / x.len() as f64;
        let floor = (opts.chi_floor * diag_scale).max(f64::MIN_POSITIVE);
        let mut chi = max_eigenvalue(&hess, opts.eig_tol).max(floor);
        if !chi.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("position optimizer"));
        }
        // The curvature at x^(q-1) need not bound h globally; double it until
        // the surrogate step actually descends.
        let mut accepted = None;
        for _ in 0..=opts.max_doublings {
            let cand = surrogate_min(&x, &grad, chi, &poly)?;
            let h_cand = objective_h(&cand, grid, wavelength);
            if h_cand <= h_prev {
                accepted = Some((cand, h_cand));
                break;
            }
            chi *= 2.0;
        }
        if let Some((cand, h_cand)) = accepted {
            x = cand;
            h_prev = h_cand;
        } else {
            log::debug!("iteration {q}: no descending step, keeping the current positions");
        }
        state.objective_history.push(h_prev);
        state.chi_history.push(chi);
        state.iteration = q;
    }
    state.x = x.clone();
    let layout = ArrayLayout::nsa(x, wavelength, panel_length)?;
    Ok((layout, state))
}

/// One row of the optimization log.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RunLogRow {
    pub q: usize,
    pub h: f64,
    pub chi: Option<f64>,
}

impl OptimizerState {
    pub fn log_rows(&self) -> Vec<RunLogRow> {
        self.objective_history
            .iter()
            .enumerate()
            .map(|(q, &h)| RunLogRow {
                q,
                h,
                chi: if q == 0 {
                    None
                } else {
                    self.chi_history.get(q - 1).copied()
                },
            })
            .collect()
    }

    /// Writes the run log as CSV with header `q,h,chi`.
    pub fn write_log_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        for row in self.log_rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}
