//! `bcsq`: command-line front end.
//!
//! Each subcommand accepts `--config file.json` whose keys mirror its flags;
//! flags override the file, which overrides the defaults. Exit codes: 0
//! success, 1 usage or input error, 2 numerical failure.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bcs_quench::cavity::{count_peaks, field_spectrum, run_cavity_experiment, CavityParams, CavityRunSpec};
use bcs_quench::dynamics::{integrate, EvolutionConfig, TrajectoryTable};
use bcs_quench::lax::{
    analytic_roots_antipodal, classify_from_roots, find_roots_numeric, Family, LaxProblem, RootSearchOptions,
    RootSearchOutcome,
};
use bcs_quench::model::{prepare_initial_state, sample_splittings, InitialStateSpec, ModelParams, SplittingKind};
use bcs_quench::observables::{spectrum, spectrum_complex, SpectrumOptions, Window};
use bcs_quench::sweep::{run_sweep, SweepSpec, UNDETERMINED};
use bcs_quench::{selftest, Error, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "bcsq",
    version,
    about = "Quench dynamics of the two-ensemble BCS pseudospin model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory of the ideal model.
    Evolve(EvolveArgs),
    /// Lax roots and phase for one parameter point.
    Lax(LaxArgs),
    /// Run a parameter sweep described by a JSON spec.
    PhaseDiagram(SweepArgs),
    /// One realistic cavity run.
    Cavity(CavityArgs),
    /// Spectrum of a column of a saved trajectory.
    Spectrum(SpectrumArgs),
    /// Special-function and conservation checks.
    Selftest,
}

/// Point parameters shared by `evolve`, `lax` and `cavity`.
#[derive(clap::Args)]
struct PointArgs {
    /// Opening angle Δφ₀ (or Δθ₀ for the elevation family), radians.
    #[arg(long, alias = "angle")]
    dphi: Option<f64>,
    #[arg(long = "eps0-over-chiN")]
    eps0_over_chi_n: Option<f64>,
    #[arg(long = "w-over-chiN")]
    w_over_chi_n: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct Point {
    angle: f64,
    eps0_over_chi_n: f64,
    w_over_chi_n: f64,
}

impl Default for Point {
    fn default() -> Self {
        Point {
            angle: PI,
            eps0_over_chi_n: 0.1,
            w_over_chi_n: 0.5,
        }
    }
}

impl PointArgs {
    fn apply(&self, p: &mut Point) {
        if let Some(v) = self.dphi {
            p.angle = v;
        }
        if let Some(v) = self.eps0_over_chi_n {
            p.eps0_over_chi_n = v;
        }
        if let Some(v) = self.w_over_chi_n {
            p.w_over_chi_n = v;
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Azimuthal,
    Elevation,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Azimuthal => Family::Azimuthal,
            FamilyArg::Elevation => Family::Elevation,
        }
    }
}

/// Evolution flags; times are in units of `1/(χN)`.
#[derive(clap::Args)]
struct EvolutionArgs {
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
}

impl EvolutionArgs {
    fn apply(&self, e: &mut EvolutionConfig) {
        if let Some(v) = self.t_max {
            e.t_max = v;
        }
        if let Some(v) = self.samples {
            e.n_samples = v;
        }
        if let Some(v) = self.rel_tol {
            e.rel_tol = v;
            e.abs_tol = 1e-2 * v;
        }
        if let Some(v) = self.gamma {
            e.gamma = v;
        }
    }
}

#[derive(clap::Args)]
struct EvolveArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    point: PointArgs,
    #[command(flatten)]
    evolution: EvolutionArgs,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Spins per ensemble.
    #[arg(long)]
    n: Option<usize>,
    /// Random splittings with this seed instead of an even grid.
    #[arg(long)]
    seed: Option<u64>,
    /// Trajectory file, `.csv` or `.json`.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EvolveConfig {
    point: Point,
    family: Family,
    n_per_ensemble: usize,
    splitting: SplittingKind,
    evolution: EvolutionConfig,
    output: Option<PathBuf>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            point: Point::default(),
            family: Family::Azimuthal,
            n_per_ensemble: 500,
            splitting: SplittingKind::EquallySpaced,
            evolution: EvolutionConfig::default(),
            output: None,
        }
    }
}

#[derive(clap::Args)]
struct LaxArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    point: PointArgs,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct LaxConfig {
    point: Point,
    family: Option<Family>,
    search: RootSearchOptions,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads; defaults to the spec, then `BCSQ_WORKERS`, then the core count.
    #[arg(long)]
    workers: Option<usize>,
    /// Reuse cells completed by an interrupted run of the same spec.
    #[arg(long)]
    resume: bool,
}

#[derive(clap::Args)]
struct CavityArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    point: PointArgs,
    #[command(flatten)]
    evolution: EvolutionArgs,
    /// Simulated spins per ensemble.
    #[arg(long)]
    n_sim: Option<usize>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CavityConfig {
    point: Point,
    params: CavityParams,
    evolution: EvolutionConfig,
    spectrum: SpectrumOptions,
    output: Option<PathBuf>,
}

impl Default for CavityConfig {
    fn default() -> Self {
        CavityConfig {
            point: Point::default(),
            params: CavityParams::default(),
            evolution: EvolutionConfig {
                t_max: 400.0,
                rel_tol: 1e-8,
                abs_tol: 1e-10,
                ..Default::default()
            },
            spectrum: SpectrumOptions {
                subtract_mean: false,
                ..Default::default()
            },
            output: None,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Signal {
    /// `|Δ(t)|`, one-sided spectrum.
    AbsDelta,
    /// Complex `Δ(t)`, two-sided spectrum.
    Delta,
    /// Complex intracavity field `a(t)`.
    Field,
    /// `|a(t)|²`.
    AbsASq,
}

#[derive(clap::Args)]
struct SpectrumArgs {
    /// Trajectory file written by `evolve` or `cavity`.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "abs-delta")]
    signal: Signal,
    /// Fraction of the record where the window starts.
    #[arg(long, default_value_t = 0.5)]
    start: f64,
    #[arg(long, default_value_t = 1.0)]
    end: f64,
    #[arg(long, default_value_t = 0.1)]
    min_prominence: f64,
    #[arg(long)]
    keep_mean: bool,
    /// Include the full frequency and magnitude arrays.
    #[arg(long)]
    full: bool,
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        path: e.path().to_string(),
        msg: e.inner().to_string(),
    })
}

fn print_json(v: &impl Serialize) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn evolve(args: &EvolveArgs) -> Result<()> {
    let mut cfg: EvolveConfig = load_config(args.config.as_deref())?;
    args.point.apply(&mut cfg.point);
    args.evolution.apply(&mut cfg.evolution);
    if let Some(f) = args.family {
        cfg.family = f.into();
    }
    if let Some(n) = args.n {
        cfg.n_per_ensemble = n;
    }
    if let Some(seed) = args.seed {
        cfg.splitting = SplittingKind::UniformRandom { seed };
    }
    if args.out.is_some() {
        cfg.output = args.out.clone();
    }
    let p = cfg.point;
    let params = ModelParams::from_ratios(cfg.n_per_ensemble, p.eps0_over_chi_n, p.w_over_chi_n)?;
    let eps = sample_splittings(&params.splitting_spec(cfg.splitting));
    let init = match cfg.family {
        Family::Azimuthal => InitialStateSpec::Azimuthal { angle: p.angle },
        Family::Elevation => InitialStateSpec::Elevation { angle: p.angle },
    };
    let state = prepare_initial_state(&init, &eps)?;
    let traj = integrate(&state, &params, &cfg.evolution)?;
    if let Some(out) = &cfg.output {
        traj.to_table().save(out)?;
    }
    let abs = traj.abs_delta();
    let last = abs.len() - 1;
    print_json(&json!({
        "samples": traj.len(),
        "t_max": traj.times[last],
        "abs_delta_final": abs[last],
        "jz_final": traj.jz[last],
        "max_norm_deviation": traj.max_norm_deviation.iter().cloned().fold(0.0, f64::max),
        "output": cfg.output,
    }))
}

fn lax(args: &LaxArgs) -> Result<()> {
    let mut cfg: LaxConfig = load_config(args.config.as_deref())?;
    args.point.apply(&mut cfg.point);
    let family = args
        .family
        .map(Family::from)
        .or(cfg.family)
        .unwrap_or(Family::Azimuthal);
    let p = cfg.point;
    let problem = LaxProblem::new(1.0, p.eps0_over_chi_n, p.w_over_chi_n, family, p.angle);
    let roots = match find_roots_numeric(&problem, &cfg.search) {
        RootSearchOutcome::Found(r) => r,
        RootSearchOutcome::Undetermined(why) => {
            eprintln!("root search undetermined: {why}");
            return Err(Error::NoConvergence {
                what: "Lax root search",
                iterations: cfg.search.max_newton,
                lo: p.w_over_chi_n,
                hi: p.w_over_chi_n,
            });
        }
    };
    let pairs = |r: &[Complex64]| r.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
    let mut out = json!({
        "angle": p.angle,
        "eps0_over_chi_n": p.eps0_over_chi_n,
        "w_over_chi_n": p.w_over_chi_n,
        "phase": classify_from_roots(&roots, cfg.search.subphase_tol),
        "roots": pairs(&roots.roots),
        "r_plus": roots.r_plus(),
        "r_minus": roots.r_minus(),
        "r_tilde": roots.r_tilde(),
    });
    if family == Family::Azimuthal && (p.angle.abs() - PI).abs() < 1e-4 {
        let exact = analytic_roots_antipodal(1.0, p.eps0_over_chi_n, p.w_over_chi_n);
        out["analytic_roots"] = json!(pairs(&exact.roots));
    }
    print_json(&out)
}

fn phase_diagram(args: &SweepArgs) -> Result<()> {
    let mut spec = SweepSpec::load(&args.config)?;
    if args.output.is_some() {
        spec.output = args.output.clone();
    }
    if args.workers.is_some() {
        spec.workers = args.workers;
    }
    let (result, manifest) = run_sweep(&spec, args.resume)?;
    let mut counts = std::collections::BTreeMap::<String, usize>::new();
    for c in &result.cells {
        *counts.entry(c.phase.clone()).or_default() += 1;
    }
    print_json(&json!({
        "output": spec.output,
        "cells": manifest.cells,
        "undetermined": manifest.undetermined,
        "resumed_cells": manifest.resumed_cells,
        "wall_time_s": manifest.wall_time_s,
        "phases": counts,
    }))?;
    if counts.contains_key(UNDETERMINED) {
        eprintln!("warning: {} undetermined cells", manifest.undetermined);
    }
    Ok(())
}

fn cavity(args: &CavityArgs) -> Result<()> {
    let mut cfg: CavityConfig = load_config(args.config.as_deref())?;
    args.point.apply(&mut cfg.point);
    args.evolution.apply(&mut cfg.evolution);
    if let Some(n) = args.n_sim {
        cfg.params.n_sim = n;
    }
    if args.out.is_some() {
        cfg.output = args.out.clone();
    }
    let p = cfg.point;
    let spec = CavityRunSpec {
        angle: p.angle,
        eps0_over_chi_n: p.eps0_over_chi_n,
        w_over_chi_n: p.w_over_chi_n,
        splitting: SplittingKind::EquallySpaced,
    };
    let run = run_cavity_experiment(&spec, &cfg.params, &cfg.evolution)?;
    if let Some(out) = &cfg.output {
        run.trajectory.to_table().save(out)?;
    }
    let s = field_spectrum(&run, &cfg.params, Window::LAST_HALF, &cfg.spectrum)?;
    print_json(&json!({
        "chi_n_rad_per_s": run.chi_n,
        "duration_s": run.trajectory.times.last(),
        "n_peaks": count_peaks(&s, 0.1),
        "peaks_over_chi_n": s.peaks.iter().take(4).map(|pk| json!({"frequency": pk.frequency, "amplitude": pk.amplitude})).collect::<Vec<_>>(),
        "output": cfg.output,
    }))
}

fn spectrum_cmd(args: &SpectrumArgs) -> Result<()> {
    let table = TrajectoryTable::load(&args.input)?;
    if table.len() < 2 {
        return Err(Error::InvalidInput("trajectory has fewer than two samples".into()));
    }
    let window = Window {
        start: args.start,
        end: args.end,
    };
    let range = window.range(table.len())?;
    let dt = (table.t[table.len() - 1] - table.t[0]) / (table.len() - 1) as f64;
    let opts = SpectrumOptions {
        subtract_mean: !args.keep_mean,
        min_prominence: args.min_prominence,
        ..Default::default()
    };
    let missing = || Error::InvalidInput("trajectory has no field columns".into());
    let s = match args.signal {
        Signal::AbsDelta => spectrum(&table.abs_delta[range], dt, &opts)?,
        Signal::Delta => spectrum_complex(&table.delta()[range], dt, &opts)?,
        Signal::Field => spectrum_complex(&table.field().ok_or_else(missing)?[range], dt, &opts)?,
        Signal::AbsASq => spectrum(&table.abs_a_sq.as_ref().ok_or_else(missing)?[range], dt, &opts)?,
    };
    if args.full {
        print_json(&s)
    } else {
        print_json(&json!({"n": s.n, "dt": s.dt, "two_sided": s.two_sided, "peaks": s.peaks}))
    }
}

/// Returns true if every check passed.
fn run_selftest() -> bool {
    let checks: Vec<_> = selftest::special_function_checks()
        .into_iter()
        .chain(selftest::conservation_checks())
        .collect();
    for c in &checks {
        println!(
            "{} {} (error {:.3e}, tolerance {:.0e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.error,
            c.tolerance
        );
    }
    checks.iter().all(|c| c.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Evolve(a) => evolve(a),
        Command::Lax(a) => lax(a),
        Command::PhaseDiagram(a) => phase_diagram(a),
        Command::Cavity(a) => cavity(a),
        Command::Spectrum(a) => spectrum_cmd(a),
        Command::Selftest => {
            return if run_selftest() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
