//! SD-A-domain sparse representation dictionaries.

use crate::beam::{measure_mainlobe, usa_beam_depth, usa_beamwidth};
use crate::channel::{steering_approx_at, SdaPoint};
use crate::error::{Error, Result};
use crate::geometry::{ArrayKind, ArrayLayout};
use crate::linalg::CMatrix;

/// Dictionary of simplified steering vectors on an `S x T` grid.
///
/// Column `d = s * T + t` (zero-based) holds `gamma(x, b_s, theta_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: CMatrix,
    grid: Vec<SdaPoint>,
    s: usize,
    t: usize,
    positions: Vec<f64>,
    wavelength: f64,
}

/// Smallest grid sizes that keep adjacent atoms inside one mainlobe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinGrid {
    pub s: usize,
    pub t: usize,
}

/// `ceil` that forgives rounding noise just above an integer.
fn ceil_tol(v: f64) -> usize {
    let r = v.round();
    if (v - r).abs() <= 1e-9 * v.abs().max(1.0) {
        r.max(1.0) as usize
    } else {
        v.ceil().max(1.0) as usize
    }
}

/// Minimum `S` and `T` for `layout`.
///
/// Uniform arrays use the closed-form mainlobe (`S >= b_max / depth`,
/// `T >= 2 / (p * width)`); nonuniform arrays use the measured 3 dB mainlobe
/// over the full angle range (`T >= 2 / width`).
pub fn min_grid(layout: &ArrayLayout, b_max: f64) -> Result<MinGrid> {
    match layout.kind() {
        ArrayKind::Usa | ArrayKind::Hula => {
            let p = layout.sparsity_factor();
            let n = layout.len();
            let depth = usa_beam_depth(p, n, layout.wavelength(), b_max);
            Ok(MinGrid {
                s: ceil_tol(b_max / depth),
                t: ceil_tol(2.0 / (p * usa_beamwidth(p, n))),
            })
        }
        ArrayKind::Nsa => {
            let w = measure_mainlobe(layout, b_max)?;
            Ok(MinGrid {
                s: ceil_tol(b_max / w.beam_depth),
                t: ceil_tol(2.0 / w.beamwidth),
            })
        }
        ArrayKind::Uca => Err(Error::NotLinear(ArrayKind::Uca)),
    }
}

/// Angle samples of one dictionary row.
///
/// Uniform arrays sample one grating period, `(1 + 2t - T) / (pT)` for
/// `t = 1..T`; nonuniform arrays sample `[-1, 1]` at the cell midpoints
/// `(2t - 1 - T) / T`.
pub fn angle_grid(kind: ArrayKind, p: f64, t: usize) -> Vec<f64> {
    let tf = t as f64;
    match kind {
        ArrayKind::Nsa | ArrayKind::Uca => (1..=t).map(|i| (2.0 * i as f64 - 1.0 - tf) / tf).collect(),
        ArrayKind::Usa | ArrayKind::Hula => (1..=t).map(|i| (1.0 + 2.0 * i as f64 - tf) / (p * tf)).collect(),
    }
}

/// Builds the dictionary of a linear layout, rejecting grids coarser than
/// [`min_grid`].
pub fn build_dictionary(layout: &ArrayLayout, b_max: f64, s: usize, t: usize) -> Result<Dictionary> {
    if !(b_max.is_finite() && b_max > 0.0) {
        return Err(Error::arg("b_max", format!("must be positive, got {b_max}")));
    }
    let min = min_grid(layout, b_max)?;
    if s < min.s || t < min.t {
        return Err(Error::Undersampled {
            min_s: min.s,
            min_t: min.t,
            s,
            t,
        });
    }
    let b_samples: Vec<f64> = (0..s).map(|i| i as f64 * b_max / s as f64).collect();
    let thetas = angle_grid(layout.kind(), layout.sparsity_factor(), t);
    Ok(Dictionary::from_grid(
        layout.linear_positions()?,
        layout.wavelength(),
        &b_samples,
        &thetas,
    ))
}

/// Far-field dictionary: `b = 0` and `T` angle midpoints over `[-1, 1]`.
pub fn farfield_dictionary(layout: &ArrayLayout, t: usize) -> Result<Dictionary> {
    if t == 0 {
        return Err(Error::arg("T", "need at least one angle sample"));
    }
    let thetas = angle_grid(ArrayKind::Nsa, 1.0, t);
    Ok(Dictionary::from_grid(
        layout.linear_positions()?,
        layout.wavelength(),
        &[0.0],
        &thetas,
    ))
}

impl Dictionary {
    /// Dictionary over the Cartesian product of the given samples.
    pub fn from_grid(xs: &[f64], wavelength: f64, b_samples: &[f64], thetas: &[f64]) -> Self {
        let grid: Vec<SdaPoint> = b_samples
            .iter()
            .flat_map(|&b| thetas.iter().map(move |&th| SdaPoint::new(b, th)))
            .collect();
        let cols: Vec<_> = grid.iter().map(|&g| steering_approx_at(xs, wavelength, g)).collect();
        Dictionary {
            atoms: CMatrix::from_columns(&cols),
            grid,
            s: b_samples.len(),
            t: thetas.len(),
            positions: xs.to_vec(),
            wavelength,
        }
    }

    pub fn atoms(&self) -> &CMatrix {
        &self.atoms
    }

    pub fn grid(&self) -> &[SdaPoint] {
        &self.grid
    }

    pub fn point(&self, column: usize) -> SdaPoint {
        self.grid[column]
    }

    pub fn column_index(&self, s: usize, t: usize) -> usize {
        s * self.t + t
    }

    /// `(S, T)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.s, self.t)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
}
