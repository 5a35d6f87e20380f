//! Near-field steering vectors, multipath channel synthesis and pilot
//! observations.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayKind, ArrayLayout, Positions};
use crate::linalg::{cis, CVector};

/// A point of the surrogate-distance / angle domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdaPoint {
    /// Surrogate distance `(1 - theta^2) / (2 r)`, 1/m.
    pub b: f64,
    /// Sine of the physical angle.
    pub theta: f64,
}

impl SdaPoint {
    pub const fn new(b: f64, theta: f64) -> Self {
        SdaPoint { b, theta }
    }

    /// Checks `theta` in `[-1, 1]` and `b` in `[0, b_max]`.
    pub fn check_bounds(self, b_max: f64) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.theta) {
            return Err(Error::arg("theta", format!("{} outside [-1, 1]", self.theta)));
        }
        if !(0.0..=b_max).contains(&self.b) {
            return Err(Error::arg("b", format!("{} outside [0, {b_max}]", self.b)));
        }
        Ok(())
    }
}

/// Maps a polar user position (distance in meters, angle in radians) to the
/// SD-A domain.
pub fn to_sda(r: f64, theta: f64) -> Result<SdaPoint> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::arg("r", format!("distance must be positive, got {r}")));
    }
    let s = theta.sin();
    let c = theta.cos();
    Ok(SdaPoint::new(c * c / (2.0 * r), s))
}

/// Inverse of [`to_sda`]: returns `(r, theta_radians)`.
pub fn from_sda(sda: SdaPoint) -> Result<(f64, f64)> {
    if !(-1.0..=1.0).contains(&sda.theta) {
        return Err(Error::arg("theta", format!("{} outside [-1, 1]", sda.theta)));
    }
    if sda.b <= 0.0 {
        return Err(Error::FarField);
    }
    let cos2 = 1.0 - sda.theta * sda.theta;
    if cos2 <= 0.0 {
        return Err(Error::Endfire);
    }
    Ok((cos2 / (2.0 * sda.b), sda.theta.asin()))
}

/// Distance from antenna `n` (array order) to a user at `(r, theta)`.
///
/// The user sits at `(r sin(theta), r cos(theta))` in the panel frame.
pub fn exact_distance(layout: &ArrayLayout, r: f64, theta: f64, n: usize) -> f64 {
    match layout.positions() {
        Positions::Linear(xs) => {
            let x = xs[n];
            (r * r - 2.0 * r * x * theta.sin() + x * x).sqrt()
        }
        Positions::Planar(pts) => {
            let [ax, ay] = pts[n];
            (r * theta.sin() - ax).hypot(r * theta.cos() - ay)
        }
    }
}

/// Spherical-wave steering vector, entry `exp(j 2 pi (r_n - r) / lambda)`.
pub fn steering_exact(layout: &ArrayLayout, r: f64, theta: f64) -> CVector {
    let k = 2.0 * PI / layout.wavelength();
    let (s, c) = theta.sin_cos();
    CVector::from_iterator(
        layout.len(),
        (0..layout.len()).map(|i| {
            let [ax, ay] = layout.point(i);
            // r_n - r = (r_n^2 - r^2) / (r_n + r), free of cancellation.
            let num = ax * ax + ay * ay - 2.0 * r * (s * ax + c * ay);
            let rn = (r * r + num).max(0.0).sqrt();
            cis(k * num / (rn + r))
        }),
    )
}

/// Simplified steering vector, entry `exp(j 2 pi (b x^2 - theta x) / lambda)`.
pub fn steering_approx(layout: &ArrayLayout, sda: SdaPoint) -> Result<CVector> {
    if layout.kind() == ArrayKind::Uca {
        return Err(Error::NotLinear(ArrayKind::Uca));
    }
    Ok(steering_approx_at(layout.linear_positions()?, layout.wavelength(), sda))
}

/// [`steering_approx`] on raw x-coordinates.
pub fn steering_approx_at(xs: &[f64], wavelength: f64, sda: SdaPoint) -> CVector {
    let k = 2.0 * PI / wavelength;
    CVector::from_iterator(xs.len(), xs.iter().map(|&x| cis(k * (sda.b * x * x - sda.theta * x))))
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParam {
    pub gain: Complex64,
    /// Meters.
    pub distance: f64,
    /// Physical angle, radians.
    pub theta_physical: f64,
    pub sda: SdaPoint,
}

impl PathParam {
    pub fn new(gain: Complex64, distance: f64, theta_physical: f64) -> Result<Self> {
        Ok(PathParam {
            gain,
            distance,
            theta_physical,
            sda: to_sda(distance, theta_physical)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub paths: Vec<PathParam>,
    /// Gain-weighted sum of the exact steering vectors of `paths`.
    pub vector: CVector,
}

/// Synthesizes the channel vector of `paths` on `layout`.
pub fn realize(layout: &ArrayLayout, paths: &[PathParam]) -> ChannelRealization {
    let mut h = CVector::zeros(layout.len());
    for p in paths {
        h.axpy(
            p.gain,
            &steering_exact(layout, p.distance, p.theta_physical),
            Complex64::ONE,
        );
    }
    ChannelRealization {
        paths: paths.to_vec(),
        vector: h,
    }
}

/// Multipath statistics of a user channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    /// Number of paths `L`: one line-of-sight path plus `L - 1` scattered ones.
    pub paths: usize,
    /// Ricean K-factor in dB: line-of-sight power over total scattered power.
    /// `inf` gives a pure line-of-sight channel.
    #[serde(with = "db_or_inf")]
    pub ricean_db: f64,
    /// Range of `theta = sin(angle)`.
    pub theta_range: [f64; 2],
    /// Distance range in meters.
    pub r_range: [f64; 2],
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            paths: 3,
            ricean_db: -10.0,
            theta_range: [-(3.0_f64.sqrt()) / 2.0, 3.0_f64.sqrt() / 2.0],
            r_range: [10.0, 100.0],
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 1 {
            return Err(Error::arg("paths", "need at least one path"));
        }
        if self.ricean_db.is_nan() || self.ricean_db == f64::NEG_INFINITY {
            return Err(Error::arg("ricean_db", format!("invalid K-factor {}", self.ricean_db)));
        }
        let [t0, t1] = self.theta_range;
        if !(t0 <= t1 && t0 >= -1.0 && t1 <= 1.0) {
            return Err(Error::arg(
                "theta_range",
                format!("[{t0}, {t1}] is empty or outside [-1, 1]"),
            ));
        }
        let [r0, r1] = self.r_range;
        if !(r0 > 0.0 && r0 <= r1 && r1.is_finite()) {
            return Err(Error::arg("r_range", format!("[{r0}, {r1}] is empty or nonpositive")));
        }
        Ok(())
    }

    /// Mean path powers, line-of-sight first; they sum to one.
    pub fn path_powers(&self) -> Vec<f64> {
        if self.paths == 1 || self.ricean_db == f64::INFINITY {
            return vec![1.0];
        }
        let k = 10f64.powf(self.ricean_db / 10.0);
        let los = k / (1.0 + k);
        let nlos = (1.0 - los) / (self.paths - 1) as f64;
        std::iter::once(los)
            .chain(std::iter::repeat_n(nlos, self.paths - 1))
            .collect()
    }
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draws path parameters (gain, distance, angle) for one user.
pub fn sample_paths<R: Rng + ?Sized>(rng: &mut R, cfg: &ChannelConfig) -> Result<Vec<PathParam>> {
    cfg.validate()?;
    cfg.path_powers()
        .into_iter()
        .map(|power| {
            let theta_sin = rng.random_range(cfg.theta_range[0]..=cfg.theta_range[1]);
            let r = rng.random_range(cfg.r_range[0]..=cfg.r_range[1]);
            let gain = complex_gaussian(rng, power);
            PathParam::new(gain, r, theta_sin.asin())
        })
        .collect()
}

/// Draws one user channel on `layout`.
pub fn sample_channel<R: Rng + ?Sized>(
    rng: &mut R,
    layout: &ArrayLayout,
    cfg: &ChannelConfig,
) -> Result<ChannelRealization> {
    let paths = sample_paths(rng, cfg)?;
    Ok(realize(layout, &paths))
}

/// Pilot observation `y = h + noise` for a unit pilot symbol.
pub fn received_pilot<R: Rng + ?Sized>(h: &CVector, sigma2: f64, rng: &mut R) -> CVector {
    if sigma2 == 0.0 {
        return h.clone();
    }
    CVector::from_iterator(h.len(), h.iter().map(|&v| v + complex_gaussian(rng, sigma2)))
}

/// Noise variance for an SNR in dB under unit transmit power.
pub fn sigma2_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

pub fn snr_db_from_sigma2(sigma2: f64) -> f64 {
    10.0 * (1.0 / sigma2).log10()
}

mod db_or_inf {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number of dB or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v.trim().to_ascii_lowercase().as_str() {
                    "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                    other => Err(E::custom(format!("expected \"inf\", got {other:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}
