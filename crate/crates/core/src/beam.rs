//! Beam gains in the SD-A domain.
//!
//! The gain of a focusing vector `u = gamma(x, k, Omega)` probed at `(b, Theta)`
//! is `G = gamma(x, b, Theta)^H u`, computed here by direct summation. For
//! uniform sparse arrays the module also provides the stationary-phase
//! amplitude with its grating-lobe structure, the Fresnel-integral distance
//! cross-section and the closed-form beamwidth / beam depth.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::SdaPoint;
use crate::error::{Error, Result};
use crate::fresnel::fresnel_cs;
use crate::geometry::ArrayLayout;
use crate::linalg::cis;

/// `|G| / N` at the half-power point, `10^(-3/20)`.
pub const HALF_POWER_RATIO: f64 = 0.707_945_784_384_137_9;

/// Beam-depth scaling factor whose normalized gain sits near -3.05 dB.
pub const DEPTH_SCALE: f64 = 3.5;

/// Exact beam gain of `focus` probed at `probe` on a linear layout.
pub fn beam_gain_exact(layout: &ArrayLayout, focus: SdaPoint, probe: SdaPoint) -> Result<Complex64> {
    Ok(beam_gain_at(
        layout.linear_positions()?,
        layout.wavelength(),
        focus,
        probe,
    ))
}

/// [`beam_gain_exact`] on raw coordinates.
pub fn beam_gain_at(xs: &[f64], wavelength: f64, focus: SdaPoint, probe: SdaPoint) -> Complex64 {
    let k = 2.0 * PI / wavelength;
    let db = probe.b - focus.b;
    let dt = probe.theta - focus.theta;
    xs.iter().map(|&x| cis(k * (dt * x - db * x * x))).sum()
}

/// Gain as a function of the offset from the focus. Equal to
/// [`beam_gain_at`] for every focus by translation invariance.
pub fn beam_gain_offset(xs: &[f64], wavelength: f64, db: f64, dtheta: f64) -> Complex64 {
    let k = 2.0 * PI / wavelength;
    xs.iter().map(|&x| cis(k * (dtheta * x - db * x * x))).sum()
}

/// Lobe indices `m` with `|Omega + 2m/p| < 1 + 1/p`.
pub fn lobe_index_set(p: f64, omega: f64) -> Vec<i64> {
    let bound = 1.0 + 1.0 / p;
    let lo = ((-bound - omega) * p / 2.0).floor() as i64 - 1;
    let hi = ((bound - omega) * p / 2.0).ceil() as i64 + 1;
    (lo..=hi)
        .filter(|&m| (omega + 2.0 * m as f64 / p).abs() < bound)
        .collect()
}

/// Angular extent of lobe `m` for a probe surrogate distance `b`:
/// `Omega + 2m/p ± p |b~ - k~| N`.
pub fn lobe_interval(p: f64, n: usize, wavelength: f64, focus: SdaPoint, b: f64, m: i64) -> (f64, f64) {
    let delta = ((b - focus.b) * wavelength / 2.0).abs();
    let center = focus.theta + 2.0 * m as f64 / p;
    let half = p * delta * n as f64;
    (center - half, center + half)
}

/// Stationary-phase amplitude of a uniform sparse array.
///
/// Each lobe contributes `1 / sqrt(p^2 |b~ - k~|)` on its coverage interval.
pub fn psp_amplitude(p: f64, n: usize, wavelength: f64, focus: SdaPoint, probe: SdaPoint) -> Result<f64> {
    let delta = ((probe.b - focus.b) * wavelength / 2.0).abs();
    if delta == 0.0 {
        return Err(Error::MatchedDistance);
    }
    let level = 1.0 / (p * p * delta).sqrt();
    let hits = lobe_index_set(p, focus.theta)
        .into_iter()
        .filter(|&m| {
            let (lo, hi) = lobe_interval(p, n, wavelength, focus, probe.b, m);
            (lo..=hi).contains(&probe.theta)
        })
        .count();
    Ok(hits as f64 * level)
}

/// Integral approximation of `|G(u, b, Omega)|` along the distance axis.
pub fn distance_cross_section(p: f64, n: usize, wavelength: f64, focus: SdaPoint, b: f64) -> f64 {
    let delta = ((b - focus.b) * wavelength / 2.0).abs();
    if delta == 0.0 {
        return n as f64;
    }
    let m_half = (n as f64 - 1.0) / 2.0 + 0.5;
    let zeta = (2.0 * p * p * delta).sqrt() * m_half;
    let (c, s) = fresnel_cs(zeta);
    ((2.0 * c * c + 2.0 * s * s) / (p * p * delta)).sqrt()
}

/// `|G| / N` on the distance axis at `|b~ - k~| = kappa / (p^2 N^2)`.
pub fn normalized_depth_gain(kappa: f64) -> f64 {
    let (c, s) = fresnel_cs((kappa / 2.0).sqrt());
    ((2.0 * c * c + 2.0 * s * s) / kappa).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LobeReport {
    pub lobe_centers: Vec<f64>,
    pub lobe_index_set: Vec<i64>,
    /// Mainlobe beamwidth in theta units, `2 / (pN)`.
    pub beamwidth: f64,
    /// Mainlobe beam depth in 1/m, `min(14 / (lambda p^2 N^2), b_max)`.
    pub beam_depth: f64,
    /// Total mainlobe coverage `p * beamwidth * beam_depth`.
    pub coverage: f64,
}

pub fn usa_beamwidth(p: f64, n: usize) -> f64 {
    2.0 / (p * n as f64)
}

pub fn usa_beam_depth(p: f64, n: usize, wavelength: f64, b_max: f64) -> f64 {
    let nn = n as f64;
    (4.0 * DEPTH_SCALE / (wavelength * p * p * nn * nn)).min(b_max)
}

pub fn usa_lobe_report(p: f64, n: usize, wavelength: f64, focus: SdaPoint, b_max: f64) -> LobeReport {
    let set = lobe_index_set(p, focus.theta);
    let beamwidth = usa_beamwidth(p, n);
    let beam_depth = usa_beam_depth(p, n, wavelength, b_max);
    LobeReport {
        lobe_centers: set.iter().map(|&m| focus.theta + 2.0 * m as f64 / p).collect(),
        lobe_index_set: set,
        beamwidth,
        beam_depth,
        coverage: p * beamwidth * beam_depth,
    }
}

/// Mainlobe coverage of the half-wavelength array, `2 b_max / N`.
pub fn hula_coverage(n: usize, b_max: f64) -> f64 {
    2.0 * b_max / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MainlobeWidth {
    /// Full 3 dB width along theta.
    pub beamwidth: f64,
    /// Full 3 dB depth along b, capped at `b_max`.
    pub beam_depth: f64,
}

/// Numerically measured 3 dB mainlobe extent of an arbitrary linear layout.
pub fn measure_mainlobe(layout: &ArrayLayout, b_max: f64) -> Result<MainlobeWidth> {
    measure_mainlobe_at(layout, SdaPoint::new(b_max / 2.0, 0.0), b_max)
}

/// As [`measure_mainlobe`] with an explicit focus.
pub fn measure_mainlobe_at(layout: &ArrayLayout, focus: SdaPoint, b_max: f64) -> Result<MainlobeWidth> {
    if !(b_max > 0.0) {
        return Err(Error::arg("b_max", format!("must be positive, got {b_max}")));
    }
    let xs = layout.linear_positions()?;
    let lambda = layout.wavelength();
    let n = xs.len() as f64;
    let aperture = xs[xs.len() - 1] - xs[0];
    let gain =
        |db: f64, dt: f64| beam_gain_at(xs, lambda, focus, SdaPoint::new(focus.b + db, focus.theta + dt)).norm() / n;

    // Scan steps well inside the expected half-widths.
    let theta_step = lambda / aperture / 40.0;
    let b_step = (lambda / (aperture * aperture / 4.0)).min(b_max) / 200.0;

    let width = |f: &dyn Fn(f64) -> f64, step: f64, limit: f64| -> f64 {
        let mut prev = 0.0;
        let mut cur = step;
        while cur <= limit {
            if f(cur) < HALF_POWER_RATIO {
                return bisect(f, prev, cur);
            }
            prev = cur;
            cur += step;
        }
        limit
    };

    let bw = width(&|d| gain(0.0, d), theta_step, 2.0) + width(&|d| gain(0.0, -d), theta_step, 2.0);
    let bd = width(&|d| gain(d, 0.0), b_step, b_max) + width(&|d| gain(-d, 0.0), b_step, b_max);
    Ok(MainlobeWidth {
        beamwidth: bw.min(2.0),
        beam_depth: bd.min(b_max),
    })
}

/// Crossing of `HALF_POWER_RATIO` between `inside` (above) and `outside`.
fn bisect(f: &dyn Fn(f64) -> f64, mut inside: f64, mut outside: f64) -> f64 {
    while outside - inside > 1e-13 * outside.abs().max(1e-3) {
        let mid = 0.5 * (inside + outside);
        if f(mid) >= HALF_POWER_RATIO {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}

/// One sample of a beam map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamSample {
    pub b: f64,
    pub theta: f64,
    pub abs_gain: f64,
}

/// `|G|` over the grid `b_values × theta_values`, row-major in `b`.
pub fn beam_map(
    layout: &ArrayLayout,
    focus: SdaPoint,
    b_values: &[f64],
    theta_values: &[f64],
) -> Result<Vec<BeamSample>> {
    let xs = layout.linear_positions()?;
    let lambda = layout.wavelength();
    let rows: Vec<Vec<BeamSample>> = b_values
        .par_iter()
        .map(|&b| {
            theta_values
                .iter()
                .map(|&theta| BeamSample {
                    b,
                    theta,
                    abs_gain: beam_gain_at(xs, lambda, focus, SdaPoint::new(b, theta)).norm(),
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Writes a beam map as CSV with header `b,theta,abs_gain`.
pub fn write_beam_map_csv<W: Write>(out: W, samples: &[BeamSample]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}
