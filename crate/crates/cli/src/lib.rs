//! Experiment runner behind the `nfsa` command.
//!
//! `nfsa run <config.json>` reads an experiment config, runs it and writes
//! CSV tables plus a `manifest.json` into the output directory.
//! `nfsa validate <config.json>` checks the config and prints the derived
//! geometry without running anything.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use nfsa_core::estimation::min_grid;
use nfsa_core::geometry::{near_field_bound, rayleigh_distance};
use nfsa_core::{ArrayKind, ArrayLayout};

use crate::config::{ArraySpec, Experiment, ExperimentConfig};
pub use crate::error::{CliError, Diagnostic, Result};
use crate::experiments::{Artifact, Context};
use crate::output::{Manifest, MANIFEST_NAME};

#[derive(Debug, Parser)]
#[command(name = "nfsa", version, about = "Near-field sparse-array experiments")]
pub struct Cli {
    /// Worker threads for Monte Carlo trials; all cores by default.
    #[arg(long, global = true, env = "NFSA_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write its tables and manifest.
    Run {
        config: PathBuf,
        /// Overrides the seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the Monte Carlo trial count of the config.
        #[arg(long)]
        trials: Option<usize>,
        /// Overrides the output directory of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and print derived quantities without running it.
    Validate { config: PathBuf },
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Seed, trial count and output directory after command-line overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub seed_defaulted: bool,
    pub trials: Option<usize>,
    pub output: PathBuf,
}

pub fn settings(cfg: &ExperimentConfig, seed: Option<u64>, trials: Option<usize>, out: Option<PathBuf>) -> Settings {
    let chosen_seed = seed.or(cfg.seed);
    let default_trials = cfg.kind().default_trials();
    Settings {
        seed: chosen_seed.unwrap_or(0),
        seed_defaulted: chosen_seed.is_none(),
        trials: default_trials.map(|d| trials.or(cfg.trials).unwrap_or(d)),
        output: out
            .or_else(|| cfg.output.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(cfg.kind().name())),
    }
}

fn warn_settings(cfg: &ExperimentConfig, s: &Settings) {
    if s.seed_defaulted {
        log::warn!("no seed given; defaulting to seed 0");
    }
    if s.trials.is_none() && cfg.trials.is_some() {
        log::warn!("{} is deterministic; `trials` is ignored", cfg.kind());
    }
}

/// Formats a length or distance without float noise.
fn num(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn describe_array(out: &mut String, path: &str, a: &ArraySpec, cfg: &ExperimentConfig) -> Result<()> {
    let b_max = cfg.b_max();
    let oversample = cfg.experiment.estimator().map(|e| e.oversample);
    let loaded = match (&a.layout_file, a.kind) {
        (Some(f), ArrayKind::Nsa) => {
            let path = cfg.resolve_path(f);
            let text = std::fs::read_to_string(&path).map_err(|source| CliError::Read { path, source })?;
            Some(ArrayLayout::from_json(&text)?)
        }
        _ => None,
    };
    let layout = match (a.kind, loaded) {
        (_, Some(l)) => Some(l),
        (ArrayKind::Usa, _) => Some(nfsa_core::geometry::build_usa(a.n, a.p, a.wavelength)?),
        (ArrayKind::Hula, _) => Some(nfsa_core::geometry::build_hula(a.n, a.wavelength)?),
        (ArrayKind::Uca, _) => Some(nfsa_core::geometry::build_uca(a.n, a.wavelength)?),
        (ArrayKind::Nsa, None) => None,
    };
    let d = match &layout {
        Some(l) => l.panel_length(),
        None => a.panel_length.unwrap_or_else(|| a.template_aperture()),
    };
    let lambda = layout.as_ref().map_or(a.wavelength, |l| l.wavelength());
    let n = layout.as_ref().map_or(a.n, |l| l.len());
    let p = match a.kind {
        ArrayKind::Hula | ArrayKind::Uca => String::new(),
        _ => format!(", p = {}", num(layout.as_ref().map_or(a.p, |l| l.sparsity_factor()))),
    };
    writeln!(
        out,
        "{path}: {}{}, N = {n}{p}, D = {} m, Rayleigh distance = {} m, near-field bound = {} m",
        a.kind,
        a.label.as_ref().map_or(String::new(), |l| format!(" `{l}`")),
        num(d),
        num(rayleigh_distance(d, lambda)),
        num(near_field_bound(d, lambda)),
    )
    .expect("writing to a string");
    let dict = match (&layout, a.kind) {
        (_, ArrayKind::Uca) => "dictionary: none (circular array)".to_string(),
        (None, _) => "dictionary: sized from the optimized layout at run time".to_string(),
        (Some(l), _) => {
            let g = min_grid(l, b_max)?;
            match oversample {
                Some(k) => format!(
                    "dictionary: minimum S x T = {} x {}, used {} x {} = {} atoms",
                    g.s,
                    g.t,
                    g.s * k,
                    g.t * k,
                    g.s * g.t * k * k
                ),
                None => format!("dictionary: minimum S x T = {} x {} = {} atoms", g.s, g.t, g.s * g.t),
            }
        }
    };
    writeln!(out, "  {dict}").expect("writing to a string");
    Ok(())
}

/// Dry-run report of a loaded config.
pub fn validate_report(cfg: &ExperimentConfig, s: &Settings) -> Result<String> {
    let mut out = String::new();
    let w = &mut out;
    let kind = cfg.kind();
    writeln!(w, "experiment: {kind} ({})", cfg.experiment.figure()).unwrap();
    let seed_note = if s.seed_defaulted { " (default)" } else { "" };
    writeln!(w, "seed: {}{seed_note}", s.seed).unwrap();
    match s.trials {
        Some(t) => writeln!(w, "trials: {t}").unwrap(),
        None => writeln!(w, "trials: n/a (deterministic)").unwrap(),
    }
    writeln!(w, "output: {}", s.output.display()).unwrap();
    writeln!(w, "b_max = {} 1/m (r_min = {} m)", num(cfg.b_max()), num(cfg.r_min)).unwrap();
    for (path, a) in cfg.experiment.arrays() {
        describe_array(w, &path, &a, cfg)?;
    }
    if let Experiment::NmseSweep(c) = &cfg.experiment {
        let names: Vec<&str> = c.methods.iter().map(|m| m.label()).collect();
        writeln!(w, "methods: {}", names.join(", ")).unwrap();
    }
    Ok(out)
}

/// Runs a loaded config and writes its artifacts. Returns the output
/// directory and the files written there.
pub fn run_experiment(cfg: &ExperimentConfig, s: &Settings) -> Result<Vec<String>> {
    let ctx = Context {
        cfg,
        seed: s.seed,
        trials: s.trials.unwrap_or(0),
    };
    let outcome = experiments::execute(&ctx)?;
    let canonical = cfg.canonical_json(s.seed, s.trials);
    let config_text = serde_json::to_string(&canonical).map_err(nfsa_core::Error::from)?;
    let manifest = Manifest {
        tool: "nfsa",
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.kind().name().to_string(),
        figure: cfg.experiment.figure(),
        description: cfg.experiment.description(),
        seed: s.seed,
        trials: s.trials,
        config_sha256: sha256_hex(config_text.as_bytes()),
        config: canonical,
        sweep_variable: outcome.sweep_variable,
        summary: outcome.summary,
        inputs: outcome.inputs,
        files: Manifest::file_entries(&outcome.artifacts),
    };
    let mut files = outcome.artifacts;
    // Last, so a directory with a manifest always has complete data.
    files.push(Artifact {
        name: MANIFEST_NAME.to_string(),
        bytes: manifest.to_bytes()?,
    });
    output::write_all(&s.output, &files)?;
    Ok(files.into_iter().map(|f| f.name).collect())
}

fn load_with_settings(
    path: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(ExperimentConfig, Settings)> {
    let cfg = config::load(path)?;
    let s = settings(&cfg, seed, trials, out);
    warn_settings(&cfg, &s);
    Ok((cfg, s))
}

/// Executes a parsed command line.
pub fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Threads("NFSA_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Threads(e.to_string()))?;
    }
    match cli.command {
        Command::Validate { config } => {
            let (cfg, s) = load_with_settings(&config, None, None, None)?;
            print!("{}", validate_report(&cfg, &s)?);
            println!("config is valid");
        }
        Command::Run {
            config,
            seed,
            trials,
            out,
        } => {
            let (cfg, s) = load_with_settings(&config, seed, trials, out)?;
            log::info!("running {} with seed {}", cfg.kind(), s.seed);
            let files = run_experiment(&cfg, &s)?;
            for f in files {
                println!("{}", s.output.join(f).display());
            }
        }
    }
    Ok(())
}
