//! Seeded Monte Carlo drivers for NMSE and sum-rate sweeps.
//!
//! Trial `i` of every sweep point draws from `trial_rng(seed, i)`, so sweep
//! points and array kinds see the same user geometry (common random
//! numbers). Trials run in parallel and are reduced in index order, which
//! keeps reports bit-identical across thread counts.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{from_sda, realize, received_pilot, sample_paths, ChannelConfig, PathParam, SdaPoint};
use crate::error::{Error, Result};
use crate::estimation::{
    build_dictionary, farfield_omp, genie_ls, ls_estimate, min_grid, nmse_ratio, ratio_db, sda_isrce, sda_omp,
    Dictionary, IsrceParams,
};
use crate::geometry::ArrayLayout;
use crate::linalg::{CMatrix, CVector};
use crate::link::{mmse_combiner, sum_rate};
use crate::rng::trial_rng;
use num_complex::Complex64;

/// Channel estimators compared in the NMSE sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SdaOmp,
    SdaIsrce,
    FarfieldOmp,
    Ls,
    GenieLs,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::SdaOmp,
        Method::SdaIsrce,
        Method::FarfieldOmp,
        Method::Ls,
        Method::GenieLs,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::SdaOmp => "sda-omp",
            Method::SdaIsrce => "sda-isrce",
            Method::FarfieldOmp => "farfield-omp",
            Method::Ls => "ls",
            Method::GenieLs => "genie-ls",
        }
    }

    /// Whether the method needs a sampled SD-A dictionary (linear arrays only).
    pub fn needs_dictionary(self) -> bool {
        matches!(self, Method::SdaOmp | Method::SdaIsrce | Method::FarfieldOmp)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::arg("method", format!("unknown estimator `{s}`")))
    }
}

/// Channel state available to the receiver when forming combiners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Csi {
    Perfect,
    /// Estimated from one unit pilot per user at the data SNR.
    Estimated(Method),
}

/// Estimator settings shared by all sweep points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// Surrogate-distance range `[0, b_max]` of the dictionary.
    pub b_max: f64,
    /// Multiplier on the minimum dictionary size along each axis.
    pub oversample: usize,
    /// Paths selected by the greedy stage.
    pub max_paths: usize,
    /// Off-grid refinement settings; `None` scales them to the noise level.
    pub isrce: Option<IsrceParams>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            b_max: 0.05,
            oversample: 2,
            max_paths: 6,
            isrce: None,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.b_max.is_finite() && self.b_max > 0.0) {
            return Err(Error::arg("b_max", format!("must be positive, got {}", self.b_max)));
        }
        if self.oversample == 0 {
            return Err(Error::arg("oversample", "must be at least 1"));
        }
        if self.max_paths == 0 {
            return Err(Error::arg("max_paths", "must be at least 1"));
        }
        if let Some(p) = &self.isrce {
            p.validate()?;
        }
        Ok(())
    }
}

/// Estimators bound to one layout, with the dictionary built once.
pub struct Estimators<'a> {
    layout: &'a ArrayLayout,
    dict: Option<Dictionary>,
    cfg: EstimatorConfig,
}

impl<'a> Estimators<'a> {
    /// Prepares the dictionaries `methods` need.
    pub fn new(layout: &'a ArrayLayout, cfg: EstimatorConfig, methods: &[Method]) -> Result<Self> {
        cfg.validate()?;
        let dict = if methods.iter().any(|m| m.needs_dictionary()) {
            let mg = min_grid(layout, cfg.b_max)?;
            Some(build_dictionary(
                layout,
                cfg.b_max,
                mg.s * cfg.oversample,
                mg.t * cfg.oversample,
            )?)
        } else {
            None
        };
        Ok(Estimators { layout, dict, cfg })
    }

    pub fn dictionary(&self) -> Option<&Dictionary> {
        self.dict.as_ref()
    }

    fn dict(&self) -> Result<&Dictionary> {
        self.dict
            .as_ref()
            .ok_or_else(|| Error::arg("methods", "dictionary was not prepared for this method"))
    }

    /// Runs every method in `methods` on one pilot. The refinement stage
    /// starts from the greedy estimate, which is computed once and shared.
    pub fn estimate_all(
        &self,
        methods: &[Method],
        y: &CVector,
        truth: &[PathParam],
        sigma2: f64,
    ) -> Result<Vec<CVector>> {
        let mut omp = None;
        let mut out = Vec::with_capacity(methods.len());
        for &m in methods {
            let est = match m {
                Method::Ls => ls_estimate(y),
                Method::GenieLs => genie_ls(y, self.layout, truth)?.channel,
                Method::FarfieldOmp => {
                    let dict = self.dict()?;
                    farfield_omp(y, self.layout, self.cfg.max_paths, dict.shape().1)?.channel
                }
                Method::SdaOmp | Method::SdaIsrce => {
                    if omp.is_none() {
                        omp = Some(sda_omp(y, self.dict()?, self.cfg.max_paths)?);
                    }
                    let init = omp.as_ref().expect("set above");
                    if m == Method::SdaOmp {
                        init.channel.clone()
                    } else {
                        let params = self.cfg.isrce.unwrap_or_else(|| IsrceParams::for_noise(sigma2));
                        let xs = self.layout.linear_positions()?;
                        sda_isrce(y, xs, self.layout.wavelength(), init, &params)?.channel
                    }
                }
            };
            out.push(est);
        }
        Ok(out)
    }

    pub fn estimate(&self, method: Method, y: &CVector, truth: &[PathParam], sigma2: f64) -> Result<CVector> {
        Ok(self.estimate_all(&[method], y, truth, sigma2)?.remove(0))
    }
}

/// Mean and standard error of independent samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl Stat {
    pub fn from_samples(samples: &[f64]) -> Stat {
        let n = samples.len();
        if n == 0 {
            return Stat {
                mean: f64::NAN,
                stderr: f64::NAN,
                trials: 0,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Stat {
            mean,
            stderr,
            trials: n,
        }
    }
}

/// One aggregated cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    pub sweep_value: f64,
    /// Array kind or estimator label.
    pub label: String,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub sweep_variable: String,
    pub seed: u64,
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn new(sweep_variable: impl Into<String>, seed: u64) -> Self {
        McReport {
            sweep_variable: sweep_variable.into(),
            seed,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, sweep_value: f64, label: &str, metric: &str, stat: Stat) {
        self.rows.push(McRow {
            sweep_value,
            label: label.to_string(),
            metric: metric.to_string(),
            mean: stat.mean,
            stderr: stat.stderr,
            trials: stat.trials,
        });
    }

    /// Looks up the row for `(sweep_value, label)`.
    pub fn get(&self, sweep_value: f64, label: &str) -> Option<&McRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.label == label)
    }

    /// Writes `sweep_value,array_kind,metric,mean,stderr,trials`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["sweep_value", "array_kind", "metric", "mean", "stderr", "trials"])?;
        for r in &self.rows {
            w.write_record([
                r.sweep_value.to_string(),
                r.label.clone(),
                r.metric.clone(),
                r.mean.to_string(),
                r.stderr.to_string(),
                r.trials.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes an NMSE report as `snr_db,method,nmse_db,trials`, with the
    /// mean ratio converted to dB.
    pub fn write_nmse_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["snr_db", "method", "nmse_db", "trials"])?;
        for r in &self.rows {
            w.write_record([
                r.sweep_value.to_string(),
                r.label.clone(),
                ratio_db(r.mean).to_string(),
                r.trials.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-trial samples for `trials` independent draws, in trial order.
fn run_trials<T, F>(seed: u64, trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut crate::rng::TrialRng) -> Result<T> + Sync,
{
    (0..trials as u64)
        .into_par_iter()
        .map(|i| f(&mut trial_rng(seed, i)))
        .collect()
}

/// NMSE of each method against the true channel, over an SNR sweep.
///
/// Rows carry the mean of `||h_hat - h||^2 / ||h||^2` (linear) under
/// metric `nmse`.
pub fn run_nmse_mc(
    layout: &ArrayLayout,
    channel: &ChannelConfig,
    snr_db: &[f64],
    methods: &[Method],
    est: EstimatorConfig,
    trials: usize,
    seed: u64,
) -> Result<McReport> {
    channel.validate()?;
    let mut report = McReport::new("snr_db", seed);
    if trials == 0 {
        return Ok(report);
    }
    let estimators = Estimators::new(layout, est, methods)?;
    for &snr in snr_db {
        let sigma2 = crate::channel::sigma2_from_snr_db(snr);
        let samples = run_trials(seed, trials, |rng| {
            let paths = sample_paths(rng, channel)?;
            let h = realize(layout, &paths).vector;
            let y = received_pilot(&h, sigma2, rng);
            let ests = estimators.estimate_all(methods, &y, &paths, sigma2)?;
            Ok(ests.iter().map(|e| nmse_ratio(e, &h)).collect::<Vec<f64>>())
        })?;
        for (j, m) in methods.iter().enumerate() {
            let column: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            report.push(snr, m.label(), "nmse", Stat::from_samples(&column));
        }
    }
    Ok(report)
}

/// One operating point of a sum-rate sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SumRatePoint {
    pub sweep_value: f64,
    pub users: usize,
    pub sigma2: f64,
    pub channel: ChannelConfig,
}

/// A layout under test together with the estimator used for imperfect CSI.
pub struct LinkArray<'a> {
    pub label: String,
    pub layout: &'a ArrayLayout,
    pub estimators: Option<Estimators<'a>>,
}

impl<'a> LinkArray<'a> {
    /// Prepares the layout for `csi`; perfect CSI needs no estimator.
    pub fn new(layout: &'a ArrayLayout, csi: Csi, est: EstimatorConfig) -> Result<Self> {
        let estimators = match csi {
            Csi::Perfect => None,
            Csi::Estimated(m) => Some(Estimators::new(layout, est, &[m])?),
        };
        Ok(LinkArray {
            label: layout.kind().label().to_string(),
            layout,
            estimators,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Sum rate of MMSE combining for `K` users drawn from one trial stream.
///
/// User geometry is drawn once per trial and realized on every array; pilot
/// noise for estimated CSI restarts from the same stream position for each
/// array.
fn sum_rate_trial(
    rng: &mut crate::rng::TrialRng,
    arrays: &[LinkArray<'_>],
    point: &SumRatePoint,
    csi: Csi,
) -> Result<Vec<f64>> {
    let users: Vec<Vec<PathParam>> = (0..point.users)
        .map(|_| sample_paths(rng, &point.channel))
        .collect::<Result<_>>()?;
    arrays
        .iter()
        .map(|arr| {
            let cols: Vec<CVector> = users.iter().map(|p| realize(arr.layout, p).vector).collect();
            let h = CMatrix::from_columns(&cols);
            let h_hat = match csi {
                Csi::Perfect => h.clone(),
                Csi::Estimated(m) => {
                    let est = arr
                        .estimators
                        .as_ref()
                        .ok_or_else(|| Error::arg("csi", "array prepared without estimator"))?;
                    let mut noise_rng = rng.clone();
                    let est_cols: Vec<CVector> = cols
                        .iter()
                        .zip(&users)
                        .map(|(hk, paths)| {
                            let y = received_pilot(hk, point.sigma2, &mut noise_rng);
                            est.estimate(m, &y, paths, point.sigma2)
                        })
                        .collect::<Result<_>>()?;
                    CMatrix::from_columns(&est_cols)
                }
            };
            let (f, _) = mmse_combiner(&h_hat, point.sigma2)?;
            Ok(sum_rate(&h, &f, point.sigma2))
        })
        .collect()
}

/// Mean sum rate (bits/s/Hz) for every array at every sweep point.
pub fn run_sum_rate_mc(
    sweep_variable: &str,
    arrays: &[LinkArray<'_>],
    points: &[SumRatePoint],
    csi: Csi,
    trials: usize,
    seed: u64,
) -> Result<McReport> {
    let mut report = McReport::new(sweep_variable, seed);
    if trials == 0 {
        return Ok(report);
    }
    for point in points {
        point.channel.validate()?;
        if point.users == 0 {
            return Err(Error::arg("users", "need at least one user"));
        }
        let samples = run_trials(seed, trials, |rng| sum_rate_trial(rng, arrays, point, csi))?;
        for (j, arr) in arrays.iter().enumerate() {
            let column: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            report.push(point.sweep_value, &arr.label, "sum_rate", Stat::from_samples(&column));
        }
    }
    Ok(report)
}

/// Sum rate of two single-path line-of-sight users with unit gains under
/// MMSE combining and perfect CSI.
pub fn two_user_sum_rate(layout: &ArrayLayout, user1: SdaPoint, user2: SdaPoint, sigma2: f64) -> Result<f64> {
    let cols = [user1, user2]
        .iter()
        .map(|&sda| {
            let (r, theta) = from_sda(sda)?;
            Ok(realize(layout, &[PathParam::new(Complex64::ONE, r, theta)?]).vector)
        })
        .collect::<Result<Vec<CVector>>>()?;
    let h = CMatrix::from_columns(&cols);
    let (f, _) = mmse_combiner(&h, sigma2)?;
    Ok(sum_rate(&h, &f, sigma2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_of_constant_samples() {
        let s = Stat::from_samples(&[2.0, 2.0, 2.0]);
        assert_eq!((s.mean, s.stderr, s.trials), (2.0, 0.0, 3));
        assert!(Stat::from_samples(&[]).mean.is_nan());
    }

    #[test]
    fn method_labels_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert!("omp".parse::<Method>().is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let mut r = McReport::new("snr_db", 0);
        r.push(10.0, "usa", "sum_rate", Stat::from_samples(&[1.0, 3.0]));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "sweep_value,array_kind,metric,mean,stderr,trials\n10,usa,sum_rate,2,1,2\n"
        );
    }
}
