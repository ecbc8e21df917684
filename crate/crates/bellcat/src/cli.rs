//! Command line front end: `sweep` writes one CSV of Bell maxima along a
//! channel's sweep variable, `validate` cross-checks closed forms against
//! the dense references, `figures` reproduces the shipped figure data from
//! the checked-in presets.
//!
//! Exit codes: 0 success, 1 validation found disagreements, 2 bad usage or
//! configuration, 3 a numerical routine failed to converge.

use crate::bell::{maximize_bell, CorrelationModel, OptimizerConfig};
use crate::brownian::{BrownianModel, BrownianParams};
use crate::markov::{DampingKind, DampingTarget, MarkovModel};
use crate::oracle::{run_validation, VALIDATION_CHANNELS};
use crate::phase_space::CatState;
use crate::postmarkov::{PostMarkovModel, PostMarkovParams};
use crate::spinstar::{trace_distance, SpinStarModel, SpinStarParams};
use crate::{Error, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

pub const SWEEP_CHANNELS: [&str; 7] =
    ["ad-spin", "ad-cv", "pd-spin", "pd-cv", "spinstar", "postmarkov", "brownian"];

pub const SWEEP_HEADER: &str = "sweep_value,max_bell,theta,theta_prime,re_beta,im_beta,re_beta_prime,im_beta_prime,converged_flag";

/// One sweep, fully specified. Files use `key = value` lines with `#`
/// comments; command line flags override file values.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub channel: String,
    pub grid_start: f64,
    pub grid_end: f64,
    pub grid_points: usize,
    /// Cat displacement.
    pub d: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Star size (spinstar only).
    pub n_spins: usize,
    /// Markovian rate and kernel rate (postmarkov only).
    pub gamma0: f64,
    pub gamma: f64,
    pub nbar: f64,
    /// Coupling, cutoff ratio omega_c/omega_O and temperature (brownian only).
    pub g: f64,
    pub x: f64,
    pub k_t: f64,
    /// Output file name, resolved against the output directory.
    pub out: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            channel: String::new(),
            grid_start: 0.0,
            grid_end: 1.0,
            grid_points: 21,
            d: 2.0,
            restarts: 64,
            seed: 7,
            n_spins: 5,
            gamma0: 1.0,
            gamma: 0.1,
            nbar: 0.0,
            g: 0.3,
            x: 10.0,
            k_t: 25.0,
            out: "sweep.csv".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected `key = value`, got '{line}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| {
                Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| {
                Error::Config(format!("cannot parse '{value}' for key '{key}'"))
            })
        }
        match key {
            "channel" => self.channel = value.to_string(),
            "grid_start" => self.grid_start = num(key, value)?,
            "grid_end" => self.grid_end = num(key, value)?,
            "grid_points" => self.grid_points = num(key, value)?,
            "d" => self.d = num(key, value)?,
            "restarts" => self.restarts = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "n_spins" => self.n_spins = num(key, value)?,
            "gamma0" => self.gamma0 = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "nbar" => self.nbar = num(key, value)?,
            "g" => self.g = num(key, value)?,
            "x" => self.x = num(key, value)?,
            "k_t" => self.k_t = num(key, value)?,
            "out" => self.out = value.to_string(),
            other => {
                return Err(Error::Config(format!("unknown configuration key '{other}'")))
            }
        }
        Ok(())
    }
}

/// Instantiate the correlation model a config describes.
pub fn build_model(cfg: &ExperimentConfig) -> Result<Box<dyn CorrelationModel + Send + Sync>> {
    let cat = CatState::new(cfg.d)?;
    Ok(match cfg.channel.as_str() {
        "ad-spin" => Box::new(MarkovModel::new(DampingKind::Amplitude, DampingTarget::Spin, cat)),
        "ad-cv" => {
            Box::new(MarkovModel::new(DampingKind::Amplitude, DampingTarget::Oscillator, cat))
        }
        "pd-spin" => Box::new(MarkovModel::new(DampingKind::Phase, DampingTarget::Spin, cat)),
        "pd-cv" => Box::new(MarkovModel::new(DampingKind::Phase, DampingTarget::Oscillator, cat)),
        "spinstar" => Box::new(SpinStarModel::new(SpinStarParams::new(cfg.n_spins)?, cat)),
        "postmarkov" => Box::new(PostMarkovModel::new(
            PostMarkovParams::new(cfg.gamma0, cfg.gamma, cfg.nbar)?,
            cat,
        )),
        "brownian" => {
            Box::new(BrownianModel::new(BrownianParams::new(cfg.g, cfg.x, cfg.k_t)?, cat))
        }
        other => {
            return Err(Error::Config(format!(
                "unknown channel '{other}' (expected one of {})",
                SWEEP_CHANNELS.join(", ")
            )))
        }
    })
}

fn grid_values(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    if cfg.grid_points == 0 {
        return Err(Error::Config("the sweep grid is empty (grid_points = 0)".into()));
    }
    if cfg.grid_points == 1 {
        return Ok(vec![cfg.grid_start]);
    }
    let n = cfg.grid_points;
    Ok((0..n)
        .map(|i| cfg.grid_start + (cfg.grid_end - cfg.grid_start) * i as f64 / (n - 1) as f64)
        .collect())
}

/// 17 significant digits, enough to round-trip an f64 exactly.
fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Run the sweep a config describes and render the CSV. Grid points are
/// maximized concurrently; rows come out in grid order and the whole
/// pipeline is deterministic, so reruns are byte-identical.
pub fn sweep_csv(cfg: &ExperimentConfig) -> Result<String> {
    let model = build_model(cfg)?;
    let grid = grid_values(cfg)?;
    let opt = OptimizerConfig {
        restarts: cfg.restarts,
        seed: cfg.seed,
        ..OptimizerConfig::default()
    };
    let maxima = grid
        .par_iter()
        .map(|&t| maximize_bell(model.as_ref(), t, &opt))
        .collect::<Result<Vec<_>>>()?;
    let mut out = String::with_capacity(64 + grid.len() * 220);
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for (t, m) in grid.iter().zip(maxima.iter()) {
        let s = &m.settings;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt17(*t),
            fmt17(m.value),
            fmt17(s.unprimed.theta),
            fmt17(s.primed.theta),
            fmt17(s.unprimed.beta.re),
            fmt17(s.unprimed.beta.im),
            fmt17(s.primed.beta.re),
            fmt17(s.primed.beta.im),
            u8::from(m.converged),
        ));
    }
    Ok(out)
}

/// Coherence suppression of the star channel on a tau grid, CSV-rendered.
pub fn trace_distance_csv(n_spins: usize, tau_end: f64, points: usize) -> Result<String> {
    if points < 2 {
        return Err(Error::Config("trace distance grid needs at least 2 points".into()));
    }
    let mut out = String::from("sweep_value,trace_distance\n");
    for i in 0..points {
        let tau = tau_end * i as f64 / (points - 1) as f64;
        out.push_str(&format!("{},{}\n", fmt17(tau), fmt17(trace_distance(tau, n_spins))));
    }
    Ok(out)
}

/// Bell maximum against bath occupation at fixed sweep time, for the
/// threshold inset: tau_sl = 1.6, gamma0/gamma = 10.
pub fn nbar_scan_csv(points: usize) -> Result<String> {
    if points < 2 {
        return Err(Error::Config("nbar grid needs at least 2 points".into()));
    }
    let cat = CatState::new(2.0)?;
    let opt = OptimizerConfig::default();
    let grid: Vec<f64> = (0..points).map(|i| 3.0 * i as f64 / (points - 1) as f64).collect();
    let maxima = grid
        .par_iter()
        .map(|&nbar| {
            let model = PostMarkovModel::new(PostMarkovParams::new(1.0, 0.1, nbar)?, cat);
            maximize_bell(&model, 1.6, &opt)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = String::with_capacity(64 + grid.len() * 220);
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for (nbar, m) in grid.iter().zip(maxima.iter()) {
        let s = &m.settings;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt17(*nbar),
            fmt17(m.value),
            fmt17(s.unprimed.theta),
            fmt17(s.primed.theta),
            fmt17(s.unprimed.beta.re),
            fmt17(s.unprimed.beta.im),
            fmt17(s.primed.beta.re),
            fmt17(s.primed.beta.im),
            u8::from(m.converged),
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// argument parsing

#[derive(Parser)]
#[command(
    name = "bellcat",
    about = "Bell-CHSH maxima of a qubit-oscillator cat state under open-system dynamics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Maximize the Bell parameter along one channel sweep and write a CSV
    Sweep(SweepArgs),
    /// Cross-check closed forms against the dense reference implementations
    Validate(ValidateArgs),
    /// Write the CSV data and plot script for a named figure (fig1..fig3)
    Figures(FigureArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Preset file with `key = value` lines; flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    grid_start: Option<f64>,
    #[arg(long)]
    grid_end: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// Cat displacement
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Star size (spinstar)
    #[arg(long)]
    n_spins: Option<usize>,
    /// Markovian rate (postmarkov)
    #[arg(long)]
    gamma0: Option<f64>,
    /// Memory-kernel rate (postmarkov)
    #[arg(long)]
    gamma: Option<f64>,
    /// Bath occupation (postmarkov)
    #[arg(long)]
    nbar: Option<f64>,
    /// Coupling strength (brownian)
    #[arg(long)]
    g: Option<f64>,
    /// Cutoff ratio omega_c/omega_O (brownian)
    #[arg(long)]
    x: Option<f64>,
    /// Bath temperature kT (brownian)
    #[arg(long)]
    k_t: Option<f64>,
    /// Output file name
    #[arg(long)]
    out: Option<String>,
    /// Output directory (falls back to $BELLCAT_OUTDIR, then `.`)
    #[arg(long)]
    outdir: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Restrict to one or more channels (repeatable); default is all
    #[arg(long = "channel")]
    channels: Vec<String>,
    /// Fock cutoff of the dense references
    #[arg(long, default_value_t = 60)]
    cutoff: usize,
    /// Comparison points per channel
    #[arg(long, default_value_t = 50)]
    points: usize,
}

#[derive(Args)]
struct FigureArgs {
    /// fig1, fig2 or fig3
    name: String,
    /// Directory holding the checked-in presets
    #[arg(long, default_value = "configs")]
    configs: PathBuf,
    /// Output directory (falls back to $BELLCAT_OUTDIR, then `.`)
    #[arg(long)]
    outdir: Option<PathBuf>,
}

fn resolve_outdir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("BELLCAT_OUTDIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.cmd {
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Validate(args) => cmd_validate(args),
        Cmd::Figures(args) => cmd_figures(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::InvalidParameter(_) | Error::Io(_) => 2,
                _ => 3,
            }
        }
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<i32> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.channel {
        cfg.channel = v;
    }
    if let Some(v) = args.grid_start {
        cfg.grid_start = v;
    }
    if let Some(v) = args.grid_end {
        cfg.grid_end = v;
    }
    if let Some(v) = args.grid_points {
        cfg.grid_points = v;
    }
    if let Some(v) = args.d {
        cfg.d = v;
    }
    if let Some(v) = args.restarts {
        cfg.restarts = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.n_spins {
        cfg.n_spins = v;
    }
    if let Some(v) = args.gamma0 {
        cfg.gamma0 = v;
    }
    if let Some(v) = args.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = args.nbar {
        cfg.nbar = v;
    }
    if let Some(v) = args.g {
        cfg.g = v;
    }
    if let Some(v) = args.x {
        cfg.x = v;
    }
    if let Some(v) = args.k_t {
        cfg.k_t = v;
    }
    if let Some(v) = args.out {
        cfg.out = v;
    }
    if cfg.channel.is_empty() {
        return Err(Error::Config(
            "no channel selected; pass --channel or a --config file".into(),
        ));
    }
    let csv = sweep_csv(&cfg)?;
    let outdir = resolve_outdir(args.outdir);
    std::fs::create_dir_all(&outdir)?;
    let path = outdir.join(&cfg.out);
    std::fs::write(&path, csv)?;
    eprintln!("wrote {}", path.display());
    Ok(0)
}

fn cmd_validate(args: ValidateArgs) -> Result<i32> {
    let selected: Vec<&str> = if args.channels.is_empty() {
        VALIDATION_CHANNELS.to_vec()
    } else {
        args.channels.iter().map(String::as_str).collect()
    };
    for name in &selected {
        if !VALIDATION_CHANNELS.contains(name) {
            return Err(Error::Config(format!(
                "unknown channel '{name}' (expected one of {})",
                VALIDATION_CHANNELS.join(", ")
            )));
        }
    }
    let report = run_validation(&selected, args.cutoff, args.points)?;
    print!("{report}");
    Ok(if report.all_pass() { 0 } else { 1 })
}

/// The preset files behind each figure, in plot order.
fn figure_presets(name: &str) -> Result<&'static [&'static str]> {
    Ok(match name {
        "fig1" => &["fig1_ad_spin", "fig1_ad_cv", "fig1_pd_spin", "fig1_pd_cv"],
        "fig2" => &["fig2_x10_g03", "fig2_x10_g01", "fig2_x10_g005", "fig2_x02_g005"],
        "fig3" => &[
            "fig3_star_n2",
            "fig3_star_n5",
            "fig3_star_n100",
            "fig3_pm_r005",
            "fig3_pm_r1",
            "fig3_pm_r10",
        ],
        other => {
            return Err(Error::Config(format!(
                "unknown figure '{other}' (expected fig1, fig2 or fig3)"
            )))
        }
    })
}

fn cmd_figures(args: FigureArgs) -> Result<i32> {
    let presets = figure_presets(&args.name)?;
    let outdir = resolve_outdir(args.outdir);
    std::fs::create_dir_all(&outdir)?;
    for stem in presets {
        let conf = args.configs.join(format!("{stem}.conf"));
        if !conf.is_file() {
            return Err(Error::Config(format!(
                "missing preset {}; pass --configs to point at the preset directory",
                conf.display()
            )));
        }
        let cfg = ExperimentConfig::from_file(&conf)?;
        let csv = sweep_csv(&cfg)?;
        let path = outdir.join(&cfg.out);
        std::fs::write(&path, csv)?;
        eprintln!("wrote {}", path.display());
    }
    if args.name == "fig3" {
        // coherence suppression overlays and the occupation-threshold inset
        for (n_spins, file) in [(2usize, "fig3_delta_n2.csv"), (100, "fig3_delta_n100.csv")] {
            let csv = trace_distance_csv(n_spins, std::f64::consts::PI, 201)?;
            let path = outdir.join(file);
            std::fs::write(&path, csv)?;
            eprintln!("wrote {}", path.display());
        }
        let csv = nbar_scan_csv(31)?;
        let path = outdir.join("fig3_inset_nbar.csv");
        std::fs::write(&path, csv)?;
        eprintln!("wrote {}", path.display());
    }
    let script = match args.name.as_str() {
        "fig1" => FIG1_SCRIPT,
        "fig2" => FIG2_SCRIPT,
        _ => FIG3_SCRIPT,
    };
    let script_path = outdir.join(format!("{}_plot.py", args.name));
    std::fs::write(&script_path, script)?;
    eprintln!("wrote {}", script_path.display());
    Ok(0)
}

const FIG1_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Bell maximum against damping probability for the four Markov channels."""
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
CURVES = [
    ("fig1_ad_spin.csv", "amplitude damping, spin"),
    ("fig1_ad_cv.csv", "amplitude damping, oscillator"),
    ("fig1_pd_spin.csv", "phase damping, spin"),
    ("fig1_pd_cv.csv", "phase damping, oscillator"),
]


def load(name):
    with open(os.path.join(HERE, name), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return (
        [float(r["sweep_value"]) for r in rows],
        [float(r["max_bell"]) for r in rows],
    )


fig, ax = plt.subplots(figsize=(6, 4))
for name, label in CURVES:
    p, b = load(name)
    ax.plot(p, b, label=label)
ax.axhline(2.0, color="k", lw=0.8, ls="--")
ax.set_xlabel("damping probability P")
ax.set_ylabel("max B")
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(os.path.join(HERE, "fig1.png"), dpi=200)
print("fig1.png")
"#;

const FIG2_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Bell maximum against tau = omega_c t for quantum Brownian motion."""
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
CURVES = [
    ("fig2_x10_g03.csv", "x=10, g=0.3"),
    ("fig2_x10_g01.csv", "x=10, g=0.1"),
    ("fig2_x10_g005.csv", "x=10, g=0.05"),
    ("fig2_x02_g005.csv", "x=0.2, g=0.05"),
]


def load(name):
    with open(os.path.join(HERE, name), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return (
        [float(r["sweep_value"]) for r in rows],
        [float(r["max_bell"]) for r in rows],
    )


fig, ax = plt.subplots(figsize=(6, 4))
for name, label in CURVES:
    tau, b = load(name)
    ax.plot(tau, b, label=label)
ax.axhline(2.0, color="k", lw=0.8, ls="--")
ax.set_xlabel(r"$\tau = \omega_c t$")
ax.set_ylabel("max B")
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(os.path.join(HERE, "fig2.png"), dpi=200)
print("fig2.png")
"#;

const FIG3_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Spin-star and memory-kernel channels: Bell maxima, coherence suppression
overlays and the occupation-threshold inset."""
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def load(name, ycol="max_bell"):
    with open(os.path.join(HERE, name), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return (
        [float(r["sweep_value"]) for r in rows],
        [float(r[ycol]) for r in rows],
    )


fig, (ax_a, ax_b) = plt.subplots(1, 2, figsize=(10, 4))

for name, label in [
    ("fig3_star_n2.csv", "N=2"),
    ("fig3_star_n5.csv", "N=5"),
    ("fig3_star_n100.csv", "N=100"),
]:
    tau, b = load(name)
    ax_a.plot(tau, b, label=label)
for name, label in [
    ("fig3_delta_n2.csv", "coherence, N=2"),
    ("fig3_delta_n100.csv", "coherence, N=100"),
]:
    tau, delta = load(name, ycol="trace_distance")
    ax_a.plot(tau, [2 * d for d in delta], ls=":", lw=0.9, label=label)
ax_a.axhline(2.0, color="k", lw=0.8, ls="--")
ax_a.set_xlabel(r"$\tau_s$")
ax_a.set_ylabel("max B")
ax_a.legend(fontsize=7)

for name, label in [
    ("fig3_pm_r005.csv", r"$\gamma_0/\gamma=0.05$"),
    ("fig3_pm_r1.csv", r"$\gamma_0/\gamma=1$"),
    ("fig3_pm_r10.csv", r"$\gamma_0/\gamma=10$"),
]:
    tau, b = load(name)
    ax_b.plot(tau, b, label=label)
ax_b.axhline(2.0, color="k", lw=0.8, ls="--")
ax_b.set_xlabel(r"$\tau_{sl} = \gamma_0 t$")
ax_b.set_ylabel("max B")
ax_b.legend(fontsize=7, loc="upper right")

inset = ax_b.inset_axes([0.45, 0.45, 0.5, 0.45])
nbar, b = load("fig3_inset_nbar.csv")
inset.plot(nbar, b)
inset.axhline(2.0, color="k", lw=0.6, ls="--")
inset.set_xlabel(r"$\bar n$", fontsize=7)
inset.set_ylabel("max B", fontsize=7)
inset.tick_params(labelsize=6)

fig.tight_layout()
fig.savefig(os.path.join(HERE, "fig3.png"), dpi=200)
print("fig3.png")
"#;

#[cfg(test)]
mod tests {
    use super::*;

    fn write_conf(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn config_files_parse_with_comments_and_overrides() {
        let dir = std::env::temp_dir().join("bellcat_conf_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = write_conf(
            &dir,
            "ok.conf",
            "# comment\nchannel = spinstar\nn_spins = 7 # trailing\ngrid_points=5\n",
        );
        let cfg = ExperimentConfig::from_file(&path).unwrap();
        assert_eq!(cfg.channel, "spinstar");
        assert_eq!(cfg.n_spins, 7);
        assert_eq!(cfg.grid_points, 5);

        let bad = write_conf(&dir, "bad.conf", "nonsense_key = 3\n");
        assert!(matches!(ExperimentConfig::from_file(&bad), Err(Error::Config(_))));
        let worse = write_conf(&dir, "worse.conf", "grid_points = many\n");
        assert!(matches!(ExperimentConfig::from_file(&worse), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_rejects_empty_grids_and_unknown_channels() {
        let cfg = ExperimentConfig {
            channel: "ad-spin".into(),
            grid_points: 0,
            ..ExperimentConfig::default()
        };
        assert!(matches!(sweep_csv(&cfg), Err(Error::Config(_))));
        let cfg = ExperimentConfig { channel: "bogus".into(), ..ExperimentConfig::default() };
        assert!(matches!(sweep_csv(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_csv_shape_and_determinism() {
        let cfg = ExperimentConfig {
            channel: "ad-spin".into(),
            grid_points: 5,
            restarts: 8,
            ..ExperimentConfig::default()
        };
        let a = sweep_csv(&cfg).unwrap();
        let b = sweep_csv(&cfg).unwrap();
        assert_eq!(a, b, "identical configs must produce identical bytes");
        let mut lines = a.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_HEADER);
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 5);
        for row in rows {
            assert_eq!(row.split(',').count(), 9);
        }
        assert!(!a.contains('\r'), "rows are LF-terminated");

        // undamped end of the grid reaches the pure-state ceiling of the
        // displaced-parity family, sqrt(5) at this displacement
        let first: Vec<&str> = a.lines().nth(1).unwrap().split(',').collect();
        let max_bell: f64 = first[1].parse().unwrap();
        assert!((max_bell - 5.0f64.sqrt()).abs() < 1e-3, "got {max_bell}");
    }

    #[test]
    fn trace_distance_csv_has_both_columns() {
        let csv = trace_distance_csv(2, std::f64::consts::PI, 5).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "sweep_value,trace_distance");
        assert_eq!(lines.len(), 6);
        // cos(2 tau) vanishes at tau = pi/4, killing the coherence
        let quarter: Vec<&str> = lines[2].split(',').collect();
        let delta: f64 = quarter[1].parse().unwrap();
        assert!(delta.abs() < 1e-12);
    }

    #[test]
    fn figure_presets_reject_unknown_names() {
        assert!(figure_presets("fig1").is_ok());
        assert!(figure_presets("fig9").is_err());
    }
}
