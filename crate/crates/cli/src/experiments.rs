//! Dispatch from configs to the simulation library. Every experiment
//! computes its artifacts in memory; nothing touches the disk here.

use std::collections::BTreeMap;

use serde::Serialize;

use nfsa_core::beam::{
    beam_gain_exact, beam_map, distance_cross_section, linspace, measure_mainlobe, write_beam_map_csv,
};
use nfsa_core::channel::sigma2_from_snr_db;
use nfsa_core::geometry::{build_hula, build_uca, build_usa};
use nfsa_core::mc::{run_nmse_mc, run_sum_rate_mc, two_user_sum_rate, LinkArray, SumRatePoint};
use nfsa_core::optimizer::{build_diff_grid, objective_h, random_init, sca_apo_from, ScaOptions};
use nfsa_core::projection::SpacingPolytope;
use nfsa_core::rng::trial_rng;
use nfsa_core::{ArrayKind, ArrayLayout, ChannelConfig, Csi, McReport, OptimizerState, SdaPoint, Stat};

use crate::config::*;
use crate::error::{CliError, Result};
use crate::sha256_hex;

/// One output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// A file read by the experiment, recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub sweep_variable: Option<&'static str>,
    /// Scalar results worth reading without opening the tables.
    pub summary: BTreeMap<String, f64>,
    pub inputs: Vec<InputFile>,
}

impl Outcome {
    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.artifacts.push(Artifact {
            name: name.into(),
            bytes,
        });
    }

    fn add_report(&mut self, name: &str, report: &McReport) -> Result<()> {
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }
}

/// A layout together with how it was obtained.
pub struct Built {
    pub layout: ArrayLayout,
    pub optimization: Option<OptimizerState>,
}

/// Run-wide settings shared by the experiments.
pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub seed: u64,
    pub trials: usize,
}

impl Context<'_> {
    fn b_max(&self) -> f64 {
        self.cfg.b_max()
    }

    /// Builds the layout of `spec`, optimizing nonuniform arrays from a
    /// random start drawn from the run seed.
    pub fn build(&self, spec: &ArraySpec, out: &mut Outcome) -> Result<Built> {
        let layout = match spec.kind {
            ArrayKind::Usa => build_usa(spec.n, spec.p, spec.wavelength)?,
            ArrayKind::Hula => build_hula(spec.n, spec.wavelength)?,
            ArrayKind::Uca => build_uca(spec.n, spec.wavelength)?,
            ArrayKind::Nsa => {
                if let Some(file) = &spec.layout_file {
                    let path = self.cfg.resolve_path(file);
                    let text = std::fs::read_to_string(&path).map_err(|source| CliError::Read {
                        path: path.clone(),
                        source,
                    })?;
                    out.inputs.push(InputFile {
                        path: file.display().to_string(),
                        sha256: sha256_hex(text.as_bytes()),
                    });
                    ArrayLayout::from_json(&text)?
                } else {
                    return self.optimize(spec);
                }
            }
        };
        Ok(Built {
            layout,
            optimization: None,
        })
    }

    fn optimize(&self, spec: &ArraySpec) -> Result<Built> {
        let o = self.cfg.optimizer;
        let panel = spec.panel_length.unwrap_or_else(|| spec.template_aperture());
        let poly = SpacingPolytope::new(spec.n, spec.wavelength / 2.0, panel)?;
        let grid = build_diff_grid(o.s, o.t, self.b_max())?;
        let x0 = random_init(&mut trial_rng(self.seed, 0), &poly);
        let opts = ScaOptions {
            iterations: o.iterations,
            ..ScaOptions::default()
        };
        log::info!("optimizing {} antenna positions on a {panel} m panel", spec.n);
        let (layout, state) = sca_apo_from(&x0, spec.wavelength, panel, &grid, opts)?;
        Ok(Built {
            layout,
            optimization: Some(state),
        })
    }

    /// Builds every array in `specs`, saving optimized layouts as artifacts.
    fn build_all(&self, specs: &[ArraySpec], out: &mut Outcome) -> Result<Vec<ArrayLayout>> {
        specs
            .iter()
            .map(|s| {
                let b = self.build(s, out)?;
                if b.optimization.is_some() {
                    out.add(format!("layout_{}.json", s.label()), layout_bytes(&b.layout)?);
                }
                Ok(b.layout)
            })
            .collect()
    }
}

fn layout_bytes(layout: &ArrayLayout) -> Result<Vec<u8>> {
    let mut text = layout.to_json()?;
    text.push('\n');
    Ok(text.into_bytes())
}

/// Runs the experiment of `ctx.cfg`.
pub fn execute(ctx: &Context<'_>) -> Result<Outcome> {
    let mut out = Outcome::default();
    match &ctx.cfg.experiment {
        Experiment::BeamMap(c) => run_beam_map(ctx, c, &mut out)?,
        Experiment::BeamCrossSection(c) => run_cross_section(ctx, c, &mut out)?,
        Experiment::OptimizePositions(c) => run_optimize(ctx, c, &mut out)?,
        Experiment::NmseSweep(c) => run_nmse(ctx, c, &mut out)?,
        Experiment::SumrateSnr(c) => {
            let points = c
                .snr_db
                .iter()
                .map(|&snr| point(snr, c.users, snr, &c.channel))
                .collect::<Vec<_>>();
            run_sum_rate(ctx, &c.arrays, c.csi, c.estimator, "snr_db", &points, &mut out)?;
        }
        Experiment::SumrateUsers(c) => {
            let points = c
                .users
                .iter()
                .map(|&k| point(k as f64, k, c.snr_db, &c.channel))
                .collect::<Vec<_>>();
            let report = run_sum_rate(ctx, &c.arrays, c.csi, c.estimator, "users", &points, &mut out)?;
            for a in &c.arrays {
                let label = a.label();
                let best = report
                    .rows
                    .iter()
                    .filter(|r| r.label == label)
                    .max_by(|x, y| x.mean.total_cmp(&y.mean));
                if let Some(r) = best {
                    out.summary.insert(format!("peak_users.{label}"), r.sweep_value);
                }
            }
        }
        Experiment::SumrateDistance(c) => {
            let points = c
                .r_max
                .iter()
                .map(|&r| {
                    let channel = ChannelConfig {
                        r_range: [c.channel.r_range[0], r],
                        ..c.channel.clone()
                    };
                    point(r, c.users, c.snr_db, &channel)
                })
                .collect::<Vec<_>>();
            run_sum_rate(ctx, &c.arrays, c.csi, c.estimator, "r_max", &points, &mut out)?;
        }
        Experiment::TwoUserAngleSweep(c) => run_two_user(ctx, c, &mut out)?,
        Experiment::SumrateSpacing(c) => run_spacing(ctx, c, &mut out)?,
    }
    Ok(out)
}

fn point(sweep_value: f64, users: usize, snr_db: f64, channel: &ChannelConfig) -> SumRatePoint {
    SumRatePoint {
        sweep_value,
        users,
        sigma2: sigma2_from_snr_db(snr_db),
        channel: channel.clone(),
    }
}

fn run_beam_map(ctx: &Context<'_>, c: &BeamMapConfig, out: &mut Outcome) -> Result<()> {
    let layout = ctx.build_all(std::slice::from_ref(&c.array), out)?.remove(0);
    let bs = linspace(c.b_range[0], c.b_range[1], c.b_points);
    let ts = linspace(c.theta_range[0], c.theta_range[1], c.theta_points);
    let map = beam_map(&layout, c.focus, &bs, &ts)?;
    let peak = map.iter().map(|s| s.abs_gain).fold(0.0, f64::max);
    out.summary.insert("peak_abs_gain".into(), peak);
    let mut buf = Vec::new();
    write_beam_map_csv(&mut buf, &map)?;
    out.add("beam_map.csv", buf);
    Ok(())
}

#[derive(Serialize)]
struct CrossSectionRow {
    b: f64,
    exact_gain: f64,
    /// Fresnel-integral form; uniform arrays only.
    closed_form_gain: Option<f64>,
}

fn run_cross_section(ctx: &Context<'_>, c: &BeamCrossSectionConfig, out: &mut Outcome) -> Result<()> {
    let layout = ctx.build_all(std::slice::from_ref(&c.array), out)?.remove(0);
    let uniform = matches!(layout.kind(), ArrayKind::Usa | ArrayKind::Hula);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for b in linspace(c.b_range[0], c.b_range[1], c.b_points) {
        let probe = SdaPoint::new(b, c.focus.theta);
        let row = CrossSectionRow {
            b,
            exact_gain: beam_gain_exact(&layout, c.focus, probe)?.norm(),
            closed_form_gain: uniform.then(|| {
                distance_cross_section(layout.sparsity_factor(), layout.len(), layout.wavelength(), c.focus, b)
            }),
        };
        w.serialize(row).map_err(nfsa_core::Error::from)?;
    }
    let buf = w.into_inner().map_err(|e| nfsa_core::Error::Io(e.into_error()))?;
    out.add("cross_section.csv", buf);
    Ok(())
}

fn run_optimize(ctx: &Context<'_>, c: &OptimizePositionsConfig, out: &mut Outcome) -> Result<()> {
    let built = ctx.build(&c.array, out)?;
    let state = built
        .optimization
        .expect("nsa arrays without a layout file are optimized");
    out.add("layout.json", layout_bytes(&built.layout)?);
    let mut log = Vec::new();
    state.write_log_csv(&mut log)?;
    out.add("run_log.csv", log);

    let o = ctx.cfg.optimizer;
    let grid = build_diff_grid(o.s, o.t, ctx.b_max())?;
    let template = build_usa(c.array.n, c.array.p, c.array.wavelength)?;
    let h_uniform = objective_h(template.linear_positions()?, &grid, template.wavelength());
    let width = measure_mainlobe(&built.layout, ctx.b_max())?;
    let s = &mut out.summary;
    s.insert("h_initial".into(), state.objective_history[0]);
    s.insert(
        "h_final".into(),
        *state.objective_history.last().expect("history starts at x0"),
    );
    s.insert("h_uniform_template".into(), h_uniform);
    s.insert("beamwidth".into(), width.beamwidth);
    s.insert("beam_depth".into(), width.beam_depth);
    Ok(())
}

fn run_nmse(ctx: &Context<'_>, c: &NmseSweepConfig, out: &mut Outcome) -> Result<()> {
    let layout = ctx.build_all(std::slice::from_ref(&c.array), out)?.remove(0);
    let report = run_nmse_mc(
        &layout,
        &c.channel,
        &c.snr_db,
        &c.methods,
        c.estimator.to_config(ctx.b_max()),
        ctx.trials,
        ctx.seed,
    )?;
    let mut buf = Vec::new();
    report.write_nmse_csv(&mut buf)?;
    out.add("nmse.csv", buf);
    out.sweep_variable = Some("snr_db");
    Ok(())
}

fn run_sum_rate(
    ctx: &Context<'_>,
    specs: &[ArraySpec],
    csi: Csi,
    est: EstimatorSpec,
    sweep: &'static str,
    points: &[SumRatePoint],
    out: &mut Outcome,
) -> Result<McReport> {
    let layouts = ctx.build_all(specs, out)?;
    let links = layouts
        .iter()
        .zip(specs)
        .map(|(l, s)| Ok(LinkArray::new(l, csi, est.to_config(ctx.b_max()))?.with_label(s.label())))
        .collect::<Result<Vec<_>>>()?;
    let report = run_sum_rate_mc(sweep, &links, points, csi, ctx.trials, ctx.seed)?;
    out.add_report("sum_rate.csv", &report)?;
    out.sweep_variable = Some(sweep);
    Ok(report)
}

fn run_two_user(ctx: &Context<'_>, c: &TwoUserAngleConfig, out: &mut Outcome) -> Result<()> {
    let layouts = ctx.build_all(&c.arrays, out)?;
    let sigma2 = sigma2_from_snr_db(c.snr_db);
    let thetas = linspace(c.theta_range[0], c.theta_range[1], c.theta_points);
    let mut report = McReport::new("theta", ctx.seed);
    for &theta in &thetas {
        for (layout, spec) in layouts.iter().zip(&c.arrays) {
            let rate = two_user_sum_rate(layout, c.user1, SdaPoint::new(c.user1.b, theta), sigma2)?;
            let stat = Stat {
                mean: rate,
                stderr: 0.0,
                trials: 1,
            };
            report.push(theta, &spec.label(), "sum_rate", stat);
        }
    }
    out.add_report("sum_rate.csv", &report)?;
    out.sweep_variable = Some("theta");
    Ok(())
}

fn run_spacing(ctx: &Context<'_>, c: &SumRateSpacingConfig, out: &mut Outcome) -> Result<()> {
    let b_max = ctx.b_max();
    let mut report = McReport::new("p", ctx.seed);
    for &p in &c.p_values {
        let specs: Vec<ArraySpec> = c.kinds.iter().map(|&k| c.array(k, p)).collect();
        let layouts = ctx.build_all(&specs, out)?;
        for &k in &c.users {
            let links =
                layouts
                    .iter()
                    .map(|l| {
                        Ok(LinkArray::new(l, c.csi, c.estimator.to_config(b_max))?
                            .with_label(format!("{}-k{k}", l.kind())))
                    })
                    .collect::<Result<Vec<_>>>()?;
            let pt = [point(p, k, c.snr_db, &c.channel)];
            let part = run_sum_rate_mc("p", &links, &pt, c.csi, ctx.trials, ctx.seed)?;
            report.rows.extend(part.rows);
        }
    }
    out.add_report("sum_rate.csv", &report)?;
    out.sweep_variable = Some("p");
    Ok(())
}
