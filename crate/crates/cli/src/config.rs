//! Experiment config files.
//!
//! A config is one JSON object. `experiment` selects the experiment; `seed`,
//! `trials`, `output`, `r_min` and `optimizer` are shared by all of them and
//! every other key belongs to the experiment. Omitted keys take defaults that
//! reproduce the corresponding figure at desk scale.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use nfsa_core::geometry::{b_max_for, build_hula, build_uca, build_usa, DEFAULT_R_MIN};
use nfsa_core::optimizer::build_diff_grid;
use nfsa_core::{ArrayKind, ChannelConfig, Csi, EstimatorConfig, IsrceParams, Method, SdaPoint};

use crate::error::{CliError, Diagnostic, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BeamMap,
    BeamCrossSection,
    OptimizePositions,
    NmseSweep,
    SumrateSnr,
    SumrateUsers,
    SumrateDistance,
    TwoUserAngleSweep,
    SumrateSpacing,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::BeamMap,
        ExperimentKind::BeamCrossSection,
        ExperimentKind::OptimizePositions,
        ExperimentKind::NmseSweep,
        ExperimentKind::SumrateSnr,
        ExperimentKind::SumrateUsers,
        ExperimentKind::SumrateDistance,
        ExperimentKind::TwoUserAngleSweep,
        ExperimentKind::SumrateSpacing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::BeamMap => "beam-map",
            ExperimentKind::BeamCrossSection => "beam-cross-section",
            ExperimentKind::OptimizePositions => "optimize-positions",
            ExperimentKind::NmseSweep => "nmse-sweep",
            ExperimentKind::SumrateSnr => "sumrate-snr",
            ExperimentKind::SumrateUsers => "sumrate-users",
            ExperimentKind::SumrateDistance => "sumrate-distance",
            ExperimentKind::TwoUserAngleSweep => "two-user-angle-sweep",
            ExperimentKind::SumrateSpacing => "sumrate-spacing",
        }
    }

    /// Monte Carlo trials when neither the config nor the command line sets
    /// them; `None` for deterministic experiments.
    pub fn default_trials(self) -> Option<usize> {
        match self {
            ExperimentKind::NmseSweep => Some(200),
            ExperimentKind::SumrateSnr
            | ExperimentKind::SumrateUsers
            | ExperimentKind::SumrateDistance
            | ExperimentKind::SumrateSpacing => Some(100),
            _ => None,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

/// One array under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArraySpec {
    pub kind: ArrayKind,
    /// Antenna count.
    pub n: usize,
    /// Sparsity factor of a uniform sparse array, and of the uniform template
    /// an optimized array starts from. Ignored by `hula` and `uca`.
    pub p: f64,
    pub wavelength: f64,
    /// Panel of an optimized array. Must hold the uniform template.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub panel_length: Option<f64>,
    /// Layout JSON with optimized positions, used instead of optimizing.
    /// Relative paths are resolved against the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout_file: Option<PathBuf>,
    /// Name in output tables; defaults to the kind.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Default for ArraySpec {
    fn default() -> Self {
        ArraySpec {
            kind: ArrayKind::Usa,
            n: 33,
            p: 10.0,
            wavelength: 0.01,
            panel_length: None,
            layout_file: None,
            label: None,
        }
    }
}

impl ArraySpec {
    pub fn of(kind: ArrayKind, p: f64) -> Self {
        ArraySpec {
            kind,
            p,
            ..ArraySpec::default()
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.label().to_string())
    }

    /// Aperture of the uniform template, `(N - 1) p lambda / 2`.
    pub fn template_aperture(&self) -> f64 {
        self.n.saturating_sub(1) as f64 * self.p * self.wavelength / 2.0
    }
}

fn four_arrays() -> Vec<ArraySpec> {
    [ArrayKind::Nsa, ArrayKind::Usa, ArrayKind::Hula, ArrayKind::Uca]
        .into_iter()
        .map(|k| ArraySpec::of(k, 10.0))
        .collect()
}

/// Settings of the antenna position optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSpec {
    /// Surrogate-distance samples of the interference objective.
    pub s: usize,
    /// Angle samples of the interference objective.
    pub t: usize,
    pub iterations: usize,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec {
            s: 64,
            t: 128,
            iterations: 100,
        }
    }
}

/// Channel estimator settings; the dictionary range follows `r_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSpec {
    pub oversample: usize,
    pub max_paths: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isrce: Option<IsrceParams>,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        let d = EstimatorConfig::default();
        EstimatorSpec {
            oversample: d.oversample,
            max_paths: d.max_paths,
            isrce: d.isrce,
        }
    }
}

impl EstimatorSpec {
    pub fn to_config(self, b_max: f64) -> EstimatorConfig {
        EstimatorConfig {
            b_max,
            oversample: self.oversample,
            max_paths: self.max_paths,
            isrce: self.isrce,
        }
    }
}

fn sumrate_channel() -> ChannelConfig {
    ChannelConfig {
        ricean_db: -20.0,
        ..ChannelConfig::default()
    }
}

/// `|G|` over a surrogate-distance / angle grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamMapConfig {
    pub array: ArraySpec,
    pub focus: SdaPoint,
    pub b_range: [f64; 2],
    pub b_points: usize,
    pub theta_range: [f64; 2],
    pub theta_points: usize,
}

impl Default for BeamMapConfig {
    fn default() -> Self {
        BeamMapConfig {
            array: ArraySpec::of(ArrayKind::Usa, 5.0),
            focus: SdaPoint::new(0.05, 0.0),
            b_range: [0.0, 0.1],
            b_points: 201,
            theta_range: [-1.0, 1.0],
            theta_points: 401,
        }
    }
}

/// Exact and closed-form gain along the surrogate distance at the focus angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamCrossSectionConfig {
    pub array: ArraySpec,
    pub focus: SdaPoint,
    pub b_range: [f64; 2],
    pub b_points: usize,
}

impl Default for BeamCrossSectionConfig {
    fn default() -> Self {
        BeamCrossSectionConfig {
            array: ArraySpec::of(ArrayKind::Usa, 5.0),
            focus: SdaPoint::new(0.05, 0.0),
            b_range: [0.0, 0.15],
            b_points: 301,
        }
    }
}

/// Optimizes antenna positions on the panel of a uniform template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizePositionsConfig {
    pub array: ArraySpec,
}

impl Default for OptimizePositionsConfig {
    fn default() -> Self {
        OptimizePositionsConfig {
            array: ArraySpec::of(ArrayKind::Nsa, 10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NmseSweepConfig {
    pub array: ArraySpec,
    pub channel: ChannelConfig,
    pub snr_db: Vec<f64>,
    pub methods: Vec<Method>,
    pub estimator: EstimatorSpec,
}

impl Default for NmseSweepConfig {
    fn default() -> Self {
        NmseSweepConfig {
            array: ArraySpec::of(ArrayKind::Nsa, 10.0),
            channel: ChannelConfig::default(),
            snr_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
            methods: Method::ALL.to_vec(),
            estimator: EstimatorSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SumRateSnrConfig {
    pub arrays: Vec<ArraySpec>,
    pub channel: ChannelConfig,
    pub users: usize,
    pub snr_db: Vec<f64>,
    pub csi: Csi,
    pub estimator: EstimatorSpec,
}

impl Default for SumRateSnrConfig {
    fn default() -> Self {
        SumRateSnrConfig {
            arrays: four_arrays(),
            channel: sumrate_channel(),
            users: 28,
            snr_db: vec![-30.0, -20.0, -10.0, 0.0, 10.0, 20.0],
            csi: Csi::Perfect,
            estimator: EstimatorSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SumRateUsersConfig {
    pub arrays: Vec<ArraySpec>,
    pub channel: ChannelConfig,
    pub users: Vec<usize>,
    pub snr_db: f64,
    pub csi: Csi,
    pub estimator: EstimatorSpec,
}

impl Default for SumRateUsersConfig {
    fn default() -> Self {
        SumRateUsersConfig {
            arrays: four_arrays(),
            channel: sumrate_channel(),
            users: (2..=40).step_by(2).collect(),
            snr_db: 20.0,
            csi: Csi::Perfect,
            estimator: EstimatorSpec::default(),
        }
    }
}

/// Sum rate as the outer edge of the user distance range grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SumRateDistanceConfig {
    pub arrays: Vec<ArraySpec>,
    /// Its `r_range[0]` is the inner edge; the outer edge is swept.
    pub channel: ChannelConfig,
    pub users: usize,
    pub snr_db: f64,
    /// Outer edges of the distance range, meters.
    pub r_max: Vec<f64>,
    pub csi: Csi,
    pub estimator: EstimatorSpec,
}

impl Default for SumRateDistanceConfig {
    fn default() -> Self {
        SumRateDistanceConfig {
            arrays: four_arrays(),
            channel: sumrate_channel(),
            users: 28,
            snr_db: 20.0,
            r_max: (1..=8).map(|i| 100.0 * i as f64).collect(),
            csi: Csi::Perfect,
            estimator: EstimatorSpec::default(),
        }
    }
}

/// Two line-of-sight users at one surrogate distance; the second user's
/// angle is swept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoUserAngleConfig {
    pub arrays: Vec<ArraySpec>,
    pub user1: SdaPoint,
    pub theta_range: [f64; 2],
    pub theta_points: usize,
    pub snr_db: f64,
}

impl Default for TwoUserAngleConfig {
    fn default() -> Self {
        TwoUserAngleConfig {
            arrays: four_arrays(),
            // 100 m broadside.
            user1: SdaPoint::new(0.005, 0.0),
            theta_range: [-0.99, 0.99],
            theta_points: 397,
            snr_db: 20.0,
        }
    }
}

/// Sum rate of uniform and optimized arrays as the sparsity factor grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SumRateSpacingConfig {
    pub kinds: Vec<ArrayKind>,
    pub n: usize,
    pub wavelength: f64,
    pub p_values: Vec<f64>,
    pub users: Vec<usize>,
    pub channel: ChannelConfig,
    pub snr_db: f64,
    pub csi: Csi,
    pub estimator: EstimatorSpec,
}

impl Default for SumRateSpacingConfig {
    fn default() -> Self {
        SumRateSpacingConfig {
            kinds: vec![ArrayKind::Nsa, ArrayKind::Usa],
            n: 33,
            wavelength: 0.01,
            p_values: vec![1.0, 2.0, 5.0, 10.0],
            users: vec![10, 20],
            channel: sumrate_channel(),
            snr_db: 20.0,
            csi: Csi::Perfect,
            estimator: EstimatorSpec::default(),
        }
    }
}

impl SumRateSpacingConfig {
    /// The array evaluated for `kind` at sparsity factor `p`, labelled
    /// e.g. `nsa-p5`.
    pub fn array(&self, kind: ArrayKind, p: f64) -> ArraySpec {
        ArraySpec {
            kind,
            n: self.n,
            p,
            wavelength: self.wavelength,
            label: Some(format!("{kind}-p{p}")),
            ..ArraySpec::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Experiment {
    BeamMap(BeamMapConfig),
    BeamCrossSection(BeamCrossSectionConfig),
    OptimizePositions(OptimizePositionsConfig),
    NmseSweep(NmseSweepConfig),
    SumrateSnr(SumRateSnrConfig),
    SumrateUsers(SumRateUsersConfig),
    SumrateDistance(SumRateDistanceConfig),
    TwoUserAngleSweep(TwoUserAngleConfig),
    SumrateSpacing(SumRateSpacingConfig),
}

impl Experiment {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Experiment::BeamMap(_) => ExperimentKind::BeamMap,
            Experiment::BeamCrossSection(_) => ExperimentKind::BeamCrossSection,
            Experiment::OptimizePositions(_) => ExperimentKind::OptimizePositions,
            Experiment::NmseSweep(_) => ExperimentKind::NmseSweep,
            Experiment::SumrateSnr(_) => ExperimentKind::SumrateSnr,
            Experiment::SumrateUsers(_) => ExperimentKind::SumrateUsers,
            Experiment::SumrateDistance(_) => ExperimentKind::SumrateDistance,
            Experiment::TwoUserAngleSweep(_) => ExperimentKind::TwoUserAngleSweep,
            Experiment::SumrateSpacing(_) => ExperimentKind::SumrateSpacing,
        }
    }

    /// Figure of the source study this experiment regenerates.
    pub fn figure(&self) -> &'static str {
        match self {
            Experiment::BeamMap(c) if c.array.kind == ArrayKind::Nsa => "Fig. 4",
            Experiment::BeamMap(_) => "Fig. 2",
            Experiment::BeamCrossSection(_) => "Fig. 3",
            Experiment::OptimizePositions(_) => "Fig. 4",
            Experiment::NmseSweep(_) => "Fig. 5",
            Experiment::SumrateSnr(_) => "Fig. 6",
            Experiment::SumrateUsers(_) => "Fig. 7",
            Experiment::SumrateDistance(_) => "Fig. 8",
            Experiment::TwoUserAngleSweep(_) => "Fig. 9",
            Experiment::SumrateSpacing(_) => "Fig. 10",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            Experiment::BeamMap(_) => "beam gain magnitude over the surrogate-distance / angle plane",
            Experiment::BeamCrossSection(_) => "beam gain along the surrogate distance, exact and closed form",
            Experiment::OptimizePositions(_) => "antenna positions minimizing the expected interference",
            Experiment::NmseSweep(_) => "channel estimation NMSE versus SNR",
            Experiment::SumrateSnr(_) => "MMSE sum rate versus SNR",
            Experiment::SumrateUsers(_) => "MMSE sum rate versus number of users",
            Experiment::SumrateDistance(_) => "MMSE sum rate versus maximum user distance",
            Experiment::TwoUserAngleSweep(_) => "two-user sum rate versus the second user's angle",
            Experiment::SumrateSpacing(_) => "MMSE sum rate versus sparsity factor",
        }
    }

    /// Every array the experiment builds, with the field path it came from.
    pub fn arrays(&self) -> Vec<(String, ArraySpec)> {
        let one = |a: &ArraySpec| vec![("array".to_string(), a.clone())];
        let many = |v: &[ArraySpec]| {
            v.iter()
                .enumerate()
                .map(|(i, a)| (format!("arrays[{i}]"), a.clone()))
                .collect()
        };
        match self {
            Experiment::BeamMap(c) => one(&c.array),
            Experiment::BeamCrossSection(c) => one(&c.array),
            Experiment::OptimizePositions(c) => one(&c.array),
            Experiment::NmseSweep(c) => one(&c.array),
            Experiment::SumrateSnr(c) => many(&c.arrays),
            Experiment::SumrateUsers(c) => many(&c.arrays),
            Experiment::SumrateDistance(c) => many(&c.arrays),
            Experiment::TwoUserAngleSweep(c) => many(&c.arrays),
            Experiment::SumrateSpacing(c) => c
                .p_values
                .iter()
                .enumerate()
                .flat_map(|(i, &p)| c.kinds.iter().map(move |&k| (format!("p_values[{i}]"), c.array(k, p))))
                .collect(),
        }
    }

    /// Estimator settings, for experiments that estimate channels.
    pub fn estimator(&self) -> Option<EstimatorSpec> {
        match self {
            Experiment::NmseSweep(c) => Some(c.estimator),
            Experiment::SumrateSnr(c) => estimated(c.csi, c.estimator),
            Experiment::SumrateUsers(c) => estimated(c.csi, c.estimator),
            Experiment::SumrateDistance(c) => estimated(c.csi, c.estimator),
            Experiment::SumrateSpacing(c) => estimated(c.csi, c.estimator),
            _ => None,
        }
    }
}

fn estimated(csi: Csi, est: EstimatorSpec) -> Option<EstimatorSpec> {
    matches!(csi, Csi::Estimated(_)).then_some(est)
}

/// A parsed config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub output: Option<PathBuf>,
    /// Minimum user distance, meters; sets `b_max = 1 / (2 r_min)`.
    pub r_min: f64,
    pub optimizer: OptimizerSpec,
    /// Directory that relative `layout_file` paths are resolved against.
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn kind(&self) -> ExperimentKind {
        self.experiment.kind()
    }

    pub fn b_max(&self) -> f64 {
        b_max_for(self.r_min)
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Config with every default spelled out, as stored in manifests. The
    /// output location is left out: it does not affect the data.
    pub fn canonical_json(&self, seed: u64, trials: Option<usize>) -> Value {
        let mut v = serde_json::to_value(&self.experiment).expect("config serializes");
        let map = v.as_object_mut().expect("experiment serializes to an object");
        map.insert("seed".into(), seed.into());
        map.insert("trials".into(), trials.map_or(Value::Null, Value::from));
        map.insert("r_min".into(), self.r_min.into());
        map.insert(
            "optimizer".into(),
            serde_json::to_value(self.optimizer).expect("optimizer settings serialize"),
        );
        v
    }
}

/// Reads and validates a config file.
pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let cfg = parse(&text, &base)?;
    let diags = validate(&cfg);
    if diags.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Config(diags))
    }
}

/// Parses config text without semantic checks.
pub fn parse(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| CliError::config("(file)", format!("not valid JSON: {e}")))?;
    let Value::Object(mut map) = value else {
        return Err(CliError::config("(root)", "expected a JSON object"));
    };
    let kind: ExperimentKind = match map.remove("experiment") {
        Some(v) => field(v, "experiment")?,
        None => {
            let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            return Err(CliError::config(
                "experiment",
                format!("missing; expected one of {}", names.join(", ")),
            ));
        }
    };
    let seed = optional(&mut map, "seed")?;
    let trials = optional(&mut map, "trials")?;
    let output = optional(&mut map, "output")?;
    let r_min = optional(&mut map, "r_min")?.unwrap_or(DEFAULT_R_MIN);
    let optimizer = optional(&mut map, "optimizer")?.unwrap_or_default();

    let rest = Value::Object(map);
    let experiment = match kind {
        ExperimentKind::BeamMap => Experiment::BeamMap(body(rest)?),
        ExperimentKind::BeamCrossSection => Experiment::BeamCrossSection(body(rest)?),
        ExperimentKind::OptimizePositions => Experiment::OptimizePositions(body(rest)?),
        ExperimentKind::NmseSweep => Experiment::NmseSweep(body(rest)?),
        ExperimentKind::SumrateSnr => Experiment::SumrateSnr(body(rest)?),
        ExperimentKind::SumrateUsers => Experiment::SumrateUsers(body(rest)?),
        ExperimentKind::SumrateDistance => Experiment::SumrateDistance(body(rest)?),
        ExperimentKind::TwoUserAngleSweep => Experiment::TwoUserAngleSweep(body(rest)?),
        ExperimentKind::SumrateSpacing => Experiment::SumrateSpacing(body(rest)?),
    };
    Ok(ExperimentConfig {
        experiment,
        seed,
        trials,
        output,
        r_min,
        optimizer,
        base_dir: base_dir.to_path_buf(),
    })
}

fn path_error(prefix: &str, e: serde_path_to_error::Error<serde_json::Error>) -> CliError {
    let path = e.path().to_string();
    let field = match (prefix, path.as_str()) {
        ("", ".") => "(root)".to_string(),
        ("", p) => p.to_string(),
        (pre, ".") => pre.to_string(),
        (pre, p) => format!("{pre}.{p}"),
    };
    CliError::config(field, e.into_inner().to_string())
}

fn field<T: DeserializeOwned>(v: Value, name: &str) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| path_error(name, e))
}

fn optional<T: DeserializeOwned>(map: &mut Map<String, Value>, name: &str) -> Result<Option<T>> {
    match map.remove(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => field(v, name).map(Some),
    }
}

fn body<T: DeserializeOwned>(v: Value) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| path_error("", e))
}

/// Collects field-level problems.
#[derive(Default)]
struct Checker {
    diags: Vec<Diagnostic>,
}

impl Checker {
    fn require(&mut self, ok: bool, field: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.diags.push(Diagnostic::new(field, message));
        }
    }

    fn core<T>(&mut self, field: impl Into<String>, r: nfsa_core::Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.diags.push(Diagnostic::new(field, e.to_string()));
                None
            }
        }
    }

    fn range(&mut self, field: &str, r: [f64; 2], points: usize, lo: f64, hi: f64) {
        let [a, b] = r;
        self.require(
            a.is_finite() && b.is_finite() && a < b && a >= lo && b <= hi,
            field,
            format!("[{a}, {b}] must be increasing within [{lo}, {hi}]"),
        );
        self.require(points >= 2, format!("{field}: points"), "need at least 2 points");
    }

    fn values(&mut self, field: &str, v: &[f64], lo: f64) {
        self.require(!v.is_empty(), field, "must not be empty");
        for (i, x) in v.iter().enumerate() {
            self.require(
                x.is_finite() && *x >= lo,
                format!("{field}[{i}]"),
                format!("{x} must be finite and at least {lo}"),
            );
        }
    }

    fn snr(&mut self, field: &str, v: f64) {
        self.require(v.is_finite(), field, format!("{v} is not a finite SNR"));
    }

    fn point(&mut self, field: &str, p: SdaPoint) {
        self.require(
            p.b.is_finite() && p.b >= 0.0,
            format!("{field}.b"),
            format!("{} must be a nonnegative surrogate distance", p.b),
        );
        self.require(
            p.theta.is_finite() && p.theta.abs() <= 1.0,
            format!("{field}.theta"),
            format!("{} must lie in [-1, 1]", p.theta),
        );
    }

    fn channel(&mut self, field: &str, c: &ChannelConfig) {
        self.core(field, c.validate());
    }

    fn estimator(&mut self, field: &str, e: &EstimatorSpec) {
        self.require(e.oversample >= 1, format!("{field}.oversample"), "must be at least 1");
        self.require(e.max_paths >= 1, format!("{field}.max_paths"), "must be at least 1");
        if let Some(p) = &e.isrce {
            self.core(format!("{field}.isrce"), p.validate());
        }
    }

    fn users(&mut self, field: &str, k: usize) {
        self.require(k >= 1, field, "need at least one user");
    }

    /// Checks that estimation with `method` is possible on `kind`.
    fn method_on(&mut self, field: &str, method: Method, kind: ArrayKind) {
        self.require(
            !method.needs_dictionary() || kind.is_linear(),
            field,
            format!("{method} needs a linear array, not {kind}"),
        );
    }

    fn csi(&mut self, arrays: &[(String, ArraySpec)], csi: Csi) {
        if let Csi::Estimated(m) = csi {
            for (_, a) in arrays {
                self.method_on("csi", m, a.kind);
            }
        }
    }

    fn array(&mut self, path: &str, a: &ArraySpec, base: &ExperimentConfig) {
        let ok = match a.kind {
            ArrayKind::Usa => self.core(path, build_usa(a.n, a.p, a.wavelength)).is_some(),
            ArrayKind::Hula => self.core(path, build_hula(a.n, a.wavelength)).is_some(),
            ArrayKind::Uca => self.core(path, build_uca(a.n, a.wavelength)).is_some(),
            ArrayKind::Nsa => {
                if let Some(file) = &a.layout_file {
                    let full = base.resolve_path(file);
                    self.require(
                        full.is_file(),
                        format!("{path}.layout_file"),
                        format!("{} does not exist", full.display()),
                    );
                    self.require(
                        a.panel_length.is_none(),
                        format!("{path}.panel_length"),
                        "a loaded layout carries its own panel",
                    );
                    false
                } else {
                    self.core(path, build_usa(a.n, a.p, a.wavelength)).is_some()
                }
            }
        };
        if a.kind != ArrayKind::Nsa {
            self.require(
                a.panel_length.is_none(),
                format!("{path}.panel_length"),
                "only optimized (nsa) arrays take a panel length",
            );
            self.require(
                a.layout_file.is_none(),
                format!("{path}.layout_file"),
                "only optimized (nsa) arrays load positions",
            );
        }
        if let (true, Some(panel)) = (ok, a.panel_length) {
            let required = a.template_aperture();
            let feasible = panel.is_finite() && panel >= required * (1.0 - 1e-12);
            if !feasible {
                self.diags.push(Diagnostic::new(
                    format!("{path}.panel_length"),
                    nfsa_core::Error::InfeasiblePanel {
                        n: a.n,
                        spacing: a.p * a.wavelength / 2.0,
                        required,
                        panel,
                    }
                    .to_string(),
                ));
            }
        }
        if let Some(l) = &a.label {
            self.require(!l.is_empty(), format!("{path}.label"), "must not be empty");
        }
    }

    fn linear(&mut self, path: &str, a: &ArraySpec) {
        self.require(
            a.kind.is_linear(),
            format!("{path}.kind"),
            "this experiment needs a linear array",
        );
    }

    fn unique_labels(&mut self, field: &str, arrays: &[ArraySpec]) {
        self.require(!arrays.is_empty(), field, "must not be empty");
        let mut seen = HashSet::new();
        for (i, a) in arrays.iter().enumerate() {
            let label = a.label();
            self.require(
                seen.insert(label.clone()),
                format!("{field}[{i}]"),
                format!("duplicate label `{label}`; set `label` to tell the arrays apart"),
            );
        }
    }
}

/// All field-level problems of a parsed config.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut c = Checker::default();
    c.require(
        cfg.r_min.is_finite() && cfg.r_min > 0.0,
        "r_min",
        format!("{} must be a positive distance", cfg.r_min),
    );
    let o = cfg.optimizer;
    if cfg.r_min > 0.0 && cfg.r_min.is_finite() {
        c.core("optimizer", build_diff_grid(o.s, o.t, cfg.b_max()).map(|_| ()));
    }
    let arrays = cfg.experiment.arrays();
    for (path, a) in &arrays {
        c.array(path, a, cfg);
    }
    if let Some(e) = cfg.experiment.estimator() {
        c.estimator("estimator", &e);
    }

    match &cfg.experiment {
        Experiment::BeamMap(b) => {
            c.linear("array", &b.array);
            c.point("focus", b.focus);
            c.range("b_range", b.b_range, b.b_points, 0.0, f64::INFINITY);
            c.range("theta_range", b.theta_range, b.theta_points, -1.0, 1.0);
        }
        Experiment::BeamCrossSection(b) => {
            c.linear("array", &b.array);
            c.point("focus", b.focus);
            c.range("b_range", b.b_range, b.b_points, 0.0, f64::INFINITY);
        }
        Experiment::OptimizePositions(p) => {
            c.require(
                p.array.kind == ArrayKind::Nsa,
                "array.kind",
                "the optimizer produces nsa layouts",
            );
            c.require(
                p.array.layout_file.is_none(),
                "array.layout_file",
                "positions are computed, not loaded",
            );
        }
        Experiment::NmseSweep(n) => {
            c.channel("channel", &n.channel);
            c.values("snr_db", &n.snr_db, f64::NEG_INFINITY);
            c.require(!n.methods.is_empty(), "methods", "must not be empty");
            let mut seen = HashSet::new();
            for (i, &m) in n.methods.iter().enumerate() {
                c.require(seen.insert(m), format!("methods[{i}]"), format!("duplicate method {m}"));
                c.method_on(&format!("methods[{i}]"), m, n.array.kind);
            }
        }
        Experiment::SumrateSnr(s) => {
            c.unique_labels("arrays", &s.arrays);
            c.channel("channel", &s.channel);
            c.users("users", s.users);
            c.values("snr_db", &s.snr_db, f64::NEG_INFINITY);
            c.csi(&arrays, s.csi);
        }
        Experiment::SumrateUsers(s) => {
            c.unique_labels("arrays", &s.arrays);
            c.channel("channel", &s.channel);
            c.snr("snr_db", s.snr_db);
            c.require(!s.users.is_empty(), "users", "must not be empty");
            for (i, &k) in s.users.iter().enumerate() {
                c.users(&format!("users[{i}]"), k);
            }
            c.csi(&arrays, s.csi);
        }
        Experiment::SumrateDistance(s) => {
            c.unique_labels("arrays", &s.arrays);
            c.channel("channel", &s.channel);
            c.users("users", s.users);
            c.snr("snr_db", s.snr_db);
            c.values("r_max", &s.r_max, s.channel.r_range[0]);
            c.csi(&arrays, s.csi);
        }
        Experiment::TwoUserAngleSweep(t) => {
            c.unique_labels("arrays", &t.arrays);
            c.point("user1", t.user1);
            c.snr("snr_db", t.snr_db);
            // Endfire points have no finite distance once b > 0.
            let (lo, hi) = if t.user1.b > 0.0 {
                (-1.0 + 1e-12, 1.0 - 1e-12)
            } else {
                (-1.0, 1.0)
            };
            c.range("theta_range", t.theta_range, t.theta_points, lo, hi);
            c.require(
                t.user1.b == 0.0 || t.user1.theta.abs() < 1.0,
                "user1.theta",
                "endfire users need b = 0",
            );
        }
        Experiment::SumrateSpacing(s) => {
            c.require(!s.kinds.is_empty(), "kinds", "must not be empty");
            let mut seen = HashSet::new();
            for (i, &k) in s.kinds.iter().enumerate() {
                c.require(seen.insert(k), format!("kinds[{i}]"), format!("duplicate kind {k}"));
            }
            c.values("p_values", &s.p_values, 1.0);
            c.require(!s.users.is_empty(), "users", "must not be empty");
            for (i, &k) in s.users.iter().enumerate() {
                c.users(&format!("users[{i}]"), k);
            }
            c.channel("channel", &s.channel);
            c.snr("snr_db", s.snr_db);
            c.csi(&arrays, s.csi);
        }
    }
    c.diags
}
