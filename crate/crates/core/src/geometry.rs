//! Array layouts and derived geometric quantities.
//!
//! Linear arrays lie on the x-axis of the panel frame, centered on the
//! origin, and are indexed `n = -M..=M` with `N = 2M + 1`. The circular
//! array lies in the x-y plane around the origin.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack (meters) accepted on the minimum-spacing and panel-bound
/// checks, so that positions produced by floating-point projections pass.
pub const POSITION_SLACK: f64 = 1e-12;

/// Default minimum user distance (meters) used to derive `b_max`.
pub const DEFAULT_R_MIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayKind {
    /// Uniform sparse array.
    Usa,
    /// Nonuniform sparse array.
    Nsa,
    /// Half-wavelength uniform linear array.
    Hula,
    /// Uniform circular array.
    Uca,
}

impl ArrayKind {
    pub fn is_linear(self) -> bool {
        !matches!(self, ArrayKind::Uca)
    }

    pub fn label(self) -> &'static str {
        match self {
            ArrayKind::Usa => "usa",
            ArrayKind::Nsa => "nsa",
            ArrayKind::Hula => "hula",
            ArrayKind::Uca => "uca",
        }
    }
}

impl fmt::Display for ArrayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Antenna coordinates in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Positions {
    /// x-coordinates of a linear array, strictly increasing.
    Linear(Vec<f64>),
    /// (x, y) coordinates of a planar array.
    Planar(Vec<[f64; 2]>),
}

impl Positions {
    pub fn len(&self) -> usize {
        match self {
            Positions::Linear(v) => v.len(),
            Positions::Planar(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A validated antenna array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayoutDoc", into = "LayoutDoc")]
pub struct ArrayLayout {
    kind: ArrayKind,
    wavelength: f64,
    panel_length: f64,
    sparsity_factor: f64,
    positions: Positions,
}

/// On-disk form of a layout: `{kind, wavelength, positions[]}` plus the
/// optional panel length. Missing panel lengths are inferred from the
/// outermost antenna.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayoutDoc {
    kind: ArrayKind,
    wavelength: f64,
    positions: Positions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    panel_length: Option<f64>,
}

impl From<ArrayLayout> for LayoutDoc {
    fn from(layout: ArrayLayout) -> Self {
        LayoutDoc {
            kind: layout.kind,
            wavelength: layout.wavelength,
            positions: layout.positions,
            panel_length: Some(layout.panel_length),
        }
    }
}

impl TryFrom<LayoutDoc> for ArrayLayout {
    type Error = Error;

    fn try_from(doc: LayoutDoc) -> Result<Self> {
        ArrayLayout::from_positions(doc.kind, doc.wavelength, doc.positions, doc.panel_length)
    }
}

fn sparsity_of(panel_length: f64, n: usize, wavelength: f64) -> f64 {
    if n < 2 {
        return 1.0;
    }
    2.0 * panel_length / ((n - 1) as f64 * wavelength)
}

fn check_wavelength(wavelength: f64) -> Result<()> {
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(Error::arg("wavelength", format!("must be positive, got {wavelength}")));
    }
    Ok(())
}

fn check_odd(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::arg("n_antennas", format!("need at least 3 antennas, got {n}")));
    }
    if n.is_multiple_of(2) {
        return Err(Error::arg(
            "n_antennas",
            format!("linear arrays need an odd antenna count (n = -M..M), got {n}"),
        ));
    }
    Ok(())
}

/// Uniform sparse array with spacing `p * wavelength / 2`.
pub fn build_usa(n_antennas: usize, p: f64, wavelength: f64) -> Result<ArrayLayout> {
    uniform_linear(ArrayKind::Usa, n_antennas, p, wavelength)
}

/// Half-wavelength uniform linear array.
pub fn build_hula(n_antennas: usize, wavelength: f64) -> Result<ArrayLayout> {
    uniform_linear(ArrayKind::Hula, n_antennas, 1.0, wavelength)
}

fn uniform_linear(kind: ArrayKind, n: usize, p: f64, wavelength: f64) -> Result<ArrayLayout> {
    check_odd(n)?;
    check_wavelength(wavelength)?;
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::arg(
            "p",
            format!("sparsity factor must be >= 1 to keep half-wavelength spacing, got {p}"),
        ));
    }
    let m = (n / 2) as i64;
    let xs = (-m..=m).map(|i| p * i as f64 * wavelength / 2.0).collect::<Vec<_>>();
    let layout = ArrayLayout {
        kind,
        wavelength,
        panel_length: p * (n - 1) as f64 * wavelength / 2.0,
        sparsity_factor: p,
        positions: Positions::Linear(xs),
    };
    layout.validate()?;
    Ok(layout)
}

/// Uniform circular array with arc spacing `wavelength / 2`.
pub fn build_uca(n_antennas: usize, wavelength: f64) -> Result<ArrayLayout> {
    if n_antennas < 3 {
        return Err(Error::arg(
            "n_antennas",
            format!("circular arrays need at least 3 antennas, got {n_antennas}"),
        ));
    }
    check_wavelength(wavelength)?;
    let radius = uca_radius(n_antennas, wavelength);
    let pts = (0..n_antennas)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / n_antennas as f64;
            [radius * phi.cos(), radius * phi.sin()]
        })
        .collect::<Vec<_>>();
    let panel_length = 2.0 * radius;
    let layout = ArrayLayout {
        kind: ArrayKind::Uca,
        wavelength,
        panel_length,
        sparsity_factor: sparsity_of(panel_length, n_antennas, wavelength),
        positions: Positions::Planar(pts),
    };
    layout.validate()?;
    Ok(layout)
}

/// Radius giving an arc spacing of half a wavelength.
pub fn uca_radius(n_antennas: usize, wavelength: f64) -> f64 {
    n_antennas as f64 * wavelength / (4.0 * PI)
}

impl ArrayLayout {
    /// Builds a layout from explicit coordinates. The panel length defaults
    /// to twice the largest coordinate magnitude.
    pub fn from_positions(
        kind: ArrayKind,
        wavelength: f64,
        positions: Positions,
        panel_length: Option<f64>,
    ) -> Result<Self> {
        check_wavelength(wavelength)?;
        let inferred = match &positions {
            Positions::Linear(xs) => 2.0 * xs.iter().fold(0.0_f64, |a, x| a.max(x.abs())),
            Positions::Planar(pts) => 2.0 * pts.iter().fold(0.0_f64, |a, p| a.max(p[0].abs()).max(p[1].abs())),
        };
        let panel_length = panel_length.unwrap_or(inferred);
        let layout = ArrayLayout {
            kind,
            wavelength,
            panel_length,
            sparsity_factor: sparsity_of(panel_length, positions.len(), wavelength),
            positions,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Nonuniform sparse array from optimized x-coordinates on a panel.
    pub fn nsa(positions: Vec<f64>, wavelength: f64, panel_length: f64) -> Result<Self> {
        Self::from_positions(
            ArrayKind::Nsa,
            wavelength,
            Positions::Linear(positions),
            Some(panel_length),
        )
    }

    pub fn validate(&self) -> Result<()> {
        check_wavelength(self.wavelength)?;
        if !(self.panel_length.is_finite() && self.panel_length > 0.0) {
            return Err(Error::InvalidLayout(format!(
                "panel length must be positive, got {}",
                self.panel_length
            )));
        }
        let half = self.panel_length / 2.0 + POSITION_SLACK;
        match (&self.positions, self.kind) {
            (Positions::Planar(_), k) if k.is_linear() => {
                Err(Error::InvalidLayout(format!("{k} layout needs x-coordinates only")))
            }
            (Positions::Linear(_), ArrayKind::Uca) => {
                Err(Error::InvalidLayout("uca layout needs (x, y) coordinates".into()))
            }
            (Positions::Linear(xs), _) => {
                check_odd(xs.len())?;
                let min_gap = self.wavelength / 2.0 - POSITION_SLACK;
                for (i, w) in xs.windows(2).enumerate() {
                    if !(w[1] - w[0] >= min_gap) {
                        return Err(Error::InvalidLayout(format!(
                            "antennas {i} and {} are {} m apart, below half a wavelength",
                            i + 1,
                            w[1] - w[0]
                        )));
                    }
                }
                if let Some(x) = xs.iter().find(|x| !(x.abs() <= half)) {
                    return Err(Error::InvalidLayout(format!(
                        "coordinate {x} lies outside the panel of length {}",
                        self.panel_length
                    )));
                }
                Ok(())
            }
            (Positions::Planar(pts), _) => {
                if pts.len() < 3 {
                    return Err(Error::InvalidLayout(format!(
                        "circular arrays need at least 3 antennas, got {}",
                        pts.len()
                    )));
                }
                if let Some(p) = pts.iter().find(|p| !(p[0].abs() <= half && p[1].abs() <= half)) {
                    return Err(Error::InvalidLayout(format!(
                        "point ({}, {}) lies outside the panel",
                        p[0], p[1]
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn kind(&self) -> ArrayKind {
        self.kind
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Panel length `D` in meters (diameter for the circular array).
    pub fn panel_length(&self) -> f64 {
        self.panel_length
    }

    /// `p = 2D / ((N - 1) wavelength)`.
    pub fn sparsity_factor(&self) -> f64 {
        self.sparsity_factor
    }

    pub fn positions(&self) -> &Positions {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// x-coordinates of a linear array.
    pub fn linear_positions(&self) -> Result<&[f64]> {
        match &self.positions {
            Positions::Linear(xs) => Ok(xs),
            Positions::Planar(_) => Err(Error::NotLinear(self.kind)),
        }
    }

    /// Coordinates of antenna `i` (array order, `0..N`).
    pub fn point(&self, i: usize) -> [f64; 2] {
        match &self.positions {
            Positions::Linear(xs) => [xs[i], 0.0],
            Positions::Planar(pts) => pts[i],
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub panel_length: f64,
    /// `2 D^2 / wavelength`.
    pub rayleigh_distance: f64,
    /// Inner edge of the radiative near field, `0.62 sqrt(D^3 / wavelength)`.
    pub near_field_bound: f64,
    /// `1 / (2 r_min)`.
    pub b_max: f64,
}

pub fn rayleigh_distance(panel_length: f64, wavelength: f64) -> f64 {
    // D/lambda first keeps round apertures exact (1.6 m at 1 cm gives 512 m).
    2.0 * panel_length * (panel_length / wavelength)
}

pub fn near_field_bound(panel_length: f64, wavelength: f64) -> f64 {
    0.62 * (panel_length.powi(3) / wavelength).sqrt()
}

/// Largest surrogate distance reachable by a user at distance `r_min`.
pub fn b_max_for(r_min: f64) -> f64 {
    1.0 / (2.0 * r_min)
}

pub fn geometry_summary(layout: &ArrayLayout, r_min: f64) -> Result<GeometrySummary> {
    if !(r_min.is_finite() && r_min > 0.0) {
        return Err(Error::arg("r_min", format!("must be positive, got {r_min}")));
    }
    let d = layout.panel_length();
    let lambda = layout.wavelength();
    let summary = GeometrySummary {
        panel_length: d,
        rayleigh_distance: rayleigh_distance(d, lambda),
        near_field_bound: near_field_bound(d, lambda),
        b_max: b_max_for(r_min),
    };
    if r_min <= summary.near_field_bound {
        log::warn!(
            "r_min = {r_min} m is inside the near-field bound {:.3} m; the simplified \
             steering model loses accuracy there",
            summary.near_field_bound
        );
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usa_positions_and_panel() {
        let a = build_usa(33, 5.0, 0.01).unwrap();
        let xs = a.linear_positions().unwrap();
        assert!((xs[32] - 0.40).abs() < 1e-15);
        let b = build_usa(33, 10.0, 0.01).unwrap();
        assert!((b.panel_length() - 1.6).abs() < 1e-15);
    }

    #[test]
    fn usa_with_unit_sparsity_matches_hula() {
        let a = build_usa(33, 1.0, 0.01).unwrap();
        let h = build_hula(33, 0.01).unwrap();
        assert_eq!(a.positions(), h.positions());
        assert_eq!(h.kind(), ArrayKind::Hula);
        assert!((h.panel_length() - 0.16).abs() < 1e-15);
    }

    #[test]
    fn small_hula_is_symmetric() {
        let h = build_hula(3, 0.01).unwrap();
        assert_eq!(h.linear_positions().unwrap(), &[-0.005, 0.0, 0.005]);
    }

    #[test]
    fn antisymmetric_positions() {
        for p in [1.0, 2.5, 5.0, 10.0] {
            let xs = build_usa(33, p, 0.01).unwrap().linear_positions().unwrap().to_vec();
            for i in 0..xs.len() {
                assert_eq!(xs[i], -xs[xs.len() - 1 - i]);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_hula(4, 0.01).is_err());
        assert!(build_usa(33, 0.5, 0.01).is_err());
        assert!(build_usa(33, 2.0, -1.0).is_err());
        assert!(build_uca(2, 0.01).is_err());
        let err = ArrayLayout::nsa(vec![-0.01, 0.0, 0.004], 0.01, 1.0).unwrap_err();
        assert!(err.to_string().contains("half a wavelength"));
        assert!(ArrayLayout::nsa(vec![-0.01, 0.0, 0.6], 0.01, 1.0).is_err());
    }

    #[test]
    fn uca_radius_and_chord() {
        let u = build_uca(33, 0.01).unwrap();
        let r = uca_radius(33, 0.01);
        assert!((r - 0.026_260_56).abs() < 1e-7);
        for i in 0..u.len() {
            let p = u.point(i);
            assert!((p[0].hypot(p[1]) - r).abs() < 1e-15);
        }
        let (a, b) = (u.point(0), u.point(1));
        let chord = (a[0] - b[0]).hypot(a[1] - b[1]);
        assert!((chord - 2.0 * r * (PI / 33.0).sin()).abs() < 1e-15);
        assert!(chord < 0.005);
    }

    #[test]
    fn summary_values() {
        let a = build_usa(33, 10.0, 0.01).unwrap();
        let s = geometry_summary(&a, 10.0).unwrap();
        assert_eq!(s.rayleigh_distance, 512.0);
        assert!((s.b_max - 0.05).abs() < 1e-15);
        assert!((near_field_bound(1.0, 0.01) - 6.2).abs() < 1e-12);
        assert!(geometry_summary(&a, 0.0).is_err());
        // Doubling D quadruples the Rayleigh distance.
        assert_eq!(rayleigh_distance(3.2, 0.01), 4.0 * rayleigh_distance(1.6, 0.01));
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let h = build_uca(33, 0.01).unwrap();
        let back = ArrayLayout::from_json(&h.to_json().unwrap()).unwrap();
        assert_eq!(h, back);
        let doc = r#"{"kind":"usa","wavelength":0.01,"positions":[-0.025,0.0,0.025]}"#;
        let l = ArrayLayout::from_json(doc).unwrap();
        assert_eq!(l.sparsity_factor(), 5.0);
        assert!(ArrayLayout::from_json(r#"{"kind":"usa","wavelength":0.01,"positions":[0.0,0.001,0.3]}"#).is_err());
    }
}
