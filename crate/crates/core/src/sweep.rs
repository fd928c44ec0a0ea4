//! Parameter-grid sweeps over one or two axes with the Lax, trajectory or
//! cavity engine.
//!
//! A sweep writes a grid CSV and a JSON manifest. Completed work units are
//! also appended to `<output>.partial` as they finish, so an interrupted sweep
//! can be resumed; the final CSV is always written in grid order and does not
//! depend on the number of workers.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{count_peaks, field_spectrum, run_cavity_experiment, CavityParams, CavityRunSpec};
use crate::dynamics::{integrate, EvolutionConfig};
use crate::error::{Error, Result};
use crate::lax::{
    classify_from_roots, find_roots_continuation, Family, LaxProblem, RootSearchOptions, RootSearchOutcome,
};
use crate::model::{prepare_initial_state, sample_splittings, InitialStateSpec, ModelParams, SplittingKind};
use crate::observables::{classify_trajectory, PhaseDetail, SpectrumOptions, TrajectoryThresholds, Window};

/// Version of the sweep JSON schema understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "BCSQ_WORKERS";

/// Label written for cells whose evaluation failed.
pub const UNDETERMINED: &str = "undetermined";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Angle,
    WOverChiN,
    Eps0OverChiN,
}

impl Param {
    pub fn as_str(self) -> &'static str {
        match self {
            Param::Angle => "angle",
            Param::WOverChiN => "w_over_chi_n",
            Param::Eps0OverChiN => "eps0_over_chi_n",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: Param,
    pub start: f64,
    pub end: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        let frac = |k: usize| k as f64 / (n - 1) as f64;
        match self.spacing {
            Spacing::Linear => (0..n).map(|k| self.start + (self.end - self.start) * frac(k)).collect(),
            Spacing::Log => {
                let (a, b) = (self.start.ln(), self.end.ln());
                (0..n).map(|k| (a + (b - a) * frac(k)).exp()).collect()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let name = self.param.as_str();
        if self.points < 2 {
            return Err(Error::InvalidInput(format!(
                "axis {name}: points must be >= 2, got {}",
                self.points
            )));
        }
        if !(self.start.is_finite() && self.end.is_finite()) {
            return Err(Error::InvalidInput(format!("axis {name}: non-finite range")));
        }
        if self.spacing == Spacing::Log && !(self.start > 0.0 && self.end > 0.0) {
            return Err(Error::InvalidInput(format!(
                "axis {name}: log spacing needs a positive range"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Lax,
    Trajectory,
    Cavity,
}

/// Parameters shared by every cell; axis parameters override the matching field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fixed {
    pub angle: f64,
    pub w_over_chi_n: f64,
    pub eps0_over_chi_n: f64,
    pub family: Family,
    /// Spins per ensemble for the trajectory engine.
    pub n_per_ensemble: usize,
    pub splitting: SplittingKind,
}

impl Default for Fixed {
    fn default() -> Self {
        Fixed {
            angle: 0.0,
            w_over_chi_n: 0.0,
            eps0_over_chi_n: 0.1,
            family: Family::Azimuthal,
            n_per_ensemble: 400,
            splitting: SplittingKind::EquallySpaced,
        }
    }
}

/// Per-cell parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub angle: f64,
    pub w_over_chi_n: f64,
    pub eps0_over_chi_n: f64,
}

impl Point {
    fn set(&mut self, param: Param, v: f64) {
        match param {
            Param::Angle => self.angle = v,
            Param::WOverChiN => self.w_over_chi_n = v,
            Param::Eps0OverChiN => self.eps0_over_chi_n = v,
        }
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_evolution() -> EvolutionConfig {
    EvolutionConfig {
        t_max: 300.0,
        rel_tol: 1e-8,
        abs_tol: 1e-10,
        ..Default::default()
    }
}

/// A sweep as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub engine: Engine,
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub fixed: Fixed,
    #[serde(default)]
    pub lax: RootSearchOptions,
    /// Times in units of `1/(χN)`. Omitted entirely: `t_max = 300` with
    /// tolerances `1e-8`/`1e-10`; fields missing from a given block take
    /// [`EvolutionConfig::default`].
    #[serde(default = "default_evolution")]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub thresholds: TrajectoryThresholds,
    #[serde(default)]
    pub cavity: CavityParams,
    #[serde(default)]
    pub spectrum: SpectrumOptions,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Base seed; random splittings of cell `k` use `seed + k`.
    #[serde(default)]
    pub seed: u64,
}

impl SweepSpec {
    /// Parses JSON, reporting the path of an offending key or value.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: SweepSpec = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            msg: e.inner().to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config {
                path: "schema_version".into(),
                msg: format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            });
        }
        if !(1..=2).contains(&self.axes.len()) {
            return Err(Error::Config {
                path: "axes".into(),
                msg: format!("need 1 or 2 axes, got {}", self.axes.len()),
            });
        }
        if self.axes.len() == 2 && self.axes[0].param == self.axes[1].param {
            return Err(Error::Config {
                path: "axes".into(),
                msg: "both axes sweep the same parameter".into(),
            });
        }
        for (k, axis) in self.axes.iter().enumerate() {
            axis.validate().map_err(|e| Error::Config {
                path: format!("axes[{k}]"),
                msg: e.to_string(),
            })?;
        }
        if self.fixed.n_per_ensemble == 0 {
            return Err(Error::Config {
                path: "fixed.n_per_ensemble".into(),
                msg: "must be >= 1".into(),
            });
        }
        if self.engine == Engine::Cavity {
            self.cavity.validate()?;
        }
        self.evolution.validate()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.axes[0].points, self.axes.get(1).map_or(1, |a| a.points))
    }

    pub fn point(&self, i: usize, j: usize) -> Point {
        let mut p = Point {
            angle: self.fixed.angle,
            w_over_chi_n: self.fixed.w_over_chi_n,
            eps0_over_chi_n: self.fixed.eps0_over_chi_n,
        };
        p.set(self.axes[0].param, self.axes[0].values()[i]);
        if let Some(axis) = self.axes.get(1) {
            p.set(axis.param, axis.values()[j]);
        }
        p
    }

    /// Worker count from the spec, then [`WORKERS_ENV`], then the core count.
    pub fn resolved_workers(&self) -> usize {
        self.workers
            .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
            .filter(|w| *w > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    /// Columns after `i, j, angle, w_over_chi_n, eps0_over_chi_n, phase`.
    pub fn value_columns(&self) -> &'static [&'static str] {
        match self.engine {
            Engine::Lax => &["n_pairs", "r_plus", "r_minus", "r_tilde"],
            Engine::Trajectory => &[
                "mean_abs",
                "amplitude",
                "min_abs",
                "omega_osc",
                "decay_exponent",
                "jz_max",
            ],
            Engine::Cavity => &["n_peaks", "freq_1", "amp_1", "freq_2", "amp_2", "mean_abs_a"],
        }
    }

    /// The axis a Lax row continues along: `W` if swept, otherwise none.
    fn lax_row_axis(&self) -> Option<usize> {
        self.axes.iter().position(|a| a.param == Param::WOverChiN)
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
    pub angle: f64,
    pub w_over_chi_n: f64,
    pub eps0_over_chi_n: f64,
    /// Phase label, [`UNDETERMINED`] on failure, empty if the engine gives none.
    pub phase: String,
    /// Engine-specific values in [`SweepSpec::value_columns`] order; NaN if absent.
    pub values: Vec<f64>,
    /// Failure reason for undetermined cells.
    pub reason: String,
}

impl Cell {
    fn new(spec: &SweepSpec, i: usize, j: usize) -> Self {
        let p = spec.point(i, j);
        Cell {
            i,
            j,
            angle: p.angle,
            w_over_chi_n: p.w_over_chi_n,
            eps0_over_chi_n: p.eps0_over_chi_n,
            phase: String::new(),
            values: vec![f64::NAN; spec.value_columns().len()],
            reason: String::new(),
        }
    }

    fn fail(mut self, why: impl std::fmt::Display) -> Self {
        self.phase = UNDETERMINED.into();
        self.reason = why.to_string();
        self
    }

    fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.i.to_string(),
            self.j.to_string(),
            self.angle.to_string(),
            self.w_over_chi_n.to_string(),
            self.eps0_over_chi_n.to_string(),
            self.phase.clone(),
        ];
        r.extend(self.values.iter().map(|v| v.to_string()));
        r.push(self.reason.clone());
        r
    }

    fn from_record(rec: &csv::StringRecord, n_values: usize) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("malformed sweep row: {rec:?}"));
        if rec.len() != 7 + n_values {
            return Err(bad());
        }
        let f = |k: usize| rec[k].parse::<f64>().map_err(|_| bad());
        let u = |k: usize| rec[k].parse::<usize>().map_err(|_| bad());
        Ok(Cell {
            i: u(0)?,
            j: u(1)?,
            angle: f(2)?,
            w_over_chi_n: f(3)?,
            eps0_over_chi_n: f(4)?,
            phase: rec[5].to_string(),
            values: (6..6 + n_values).map(f).collect::<Result<_>>()?,
            reason: rec[6 + n_values].to_string(),
        })
    }
}

/// Evaluated grid in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub shape: (usize, usize),
    pub cells: Vec<Cell>,
}

impl SweepResult {
    pub fn get(&self, i: usize, j: usize) -> &Cell {
        &self.cells[i * self.shape.1 + j]
    }

    pub fn header(spec: &SweepSpec) -> Vec<String> {
        let mut h: Vec<String> = ["i", "j", "angle", "w_over_chi_n", "eps0_over_chi_n", "phase"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend(spec.value_columns().iter().map(|s| s.to_string()));
        h.push("reason".into());
        h
    }

    pub fn write_csv<W: Write>(&self, spec: &SweepSpec, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::header(spec))?;
        for c in &self.cells {
            w.write_record(c.record())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(spec: &SweepSpec, path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let n = spec.value_columns().len();
        let cells = r
            .records()
            .map(|rec| Cell::from_record(&rec?, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepResult {
            shape: spec.shape(),
            cells,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: SweepSpec,
    pub code_version: String,
    pub workers: usize,
    pub wall_time_s: f64,
    pub cells: usize,
    pub undetermined: usize,
    pub resumed_cells: usize,
}

/// A schedulable unit: a whole Lax row or a single cell.
#[derive(Debug, Clone, PartialEq)]
struct Unit {
    cells: Vec<(usize, usize)>,
}

fn units(spec: &SweepSpec) -> Vec<Unit> {
    let (ni, nj) = spec.shape();
    match (spec.engine, spec.lax_row_axis()) {
        (Engine::Lax, Some(0)) => (0..nj)
            .map(|j| Unit {
                cells: (0..ni).map(|i| (i, j)).collect(),
            })
            .collect(),
        (Engine::Lax, Some(_)) => (0..ni)
            .map(|i| Unit {
                cells: (0..nj).map(|j| (i, j)).collect(),
            })
            .collect(),
        _ => (0..ni)
            .flat_map(|i| (0..nj).map(move |j| Unit { cells: vec![(i, j)] }))
            .collect(),
    }
}

fn eval_lax_unit(spec: &SweepSpec, unit: &Unit) -> Vec<Cell> {
    let cells: Vec<Cell> = unit.cells.iter().map(|&(i, j)| Cell::new(spec, i, j)).collect();
    let first = &cells[0];
    let base = LaxProblem::new(
        1.0,
        first.eps0_over_chi_n,
        first.w_over_chi_n,
        spec.fixed.family,
        first.angle,
    );
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| cells[a].w_over_chi_n.total_cmp(&cells[b].w_over_chi_n));
    let grid: Vec<f64> = order.iter().map(|&k| cells[k].w_over_chi_n).collect();
    let points = find_roots_continuation(&base, &grid, &spec.lax);
    let mut out = cells.clone();
    for (&k, point) in order.iter().zip(points) {
        out[k] = match point.outcome {
            RootSearchOutcome::Found(roots) => {
                let mut c = cells[k].clone();
                c.phase = classify_from_roots(&roots, spec.lax.subphase_tol).to_string();
                c.values = vec![
                    roots.n_pairs() as f64,
                    roots.r_plus().unwrap_or(f64::NAN),
                    roots.r_minus().unwrap_or(f64::NAN),
                    roots.r_tilde().unwrap_or(f64::NAN),
                ];
                c
            }
            RootSearchOutcome::Undetermined(why) => cells[k].clone().fail(why),
        };
    }
    out
}

fn splitting_for(spec: &SweepSpec, i: usize, j: usize) -> SplittingKind {
    match spec.fixed.splitting {
        SplittingKind::UniformRandom { seed } => SplittingKind::UniformRandom {
            seed: seed
                .wrapping_add(spec.seed)
                .wrapping_add((i * spec.shape().1 + j) as u64),
        },
        k => k,
    }
}

fn eval_trajectory_cell(spec: &SweepSpec, i: usize, j: usize) -> Result<Cell> {
    let mut cell = Cell::new(spec, i, j);
    let params = ModelParams::from_ratios(spec.fixed.n_per_ensemble, cell.eps0_over_chi_n, cell.w_over_chi_n)?;
    let splittings = sample_splittings(&params.splitting_spec(splitting_for(spec, i, j)));
    let init = match spec.fixed.family {
        Family::Azimuthal => InitialStateSpec::Azimuthal { angle: cell.angle },
        Family::Elevation => InitialStateSpec::Elevation { angle: cell.angle },
    };
    let state = prepare_initial_state(&init, &splittings)?;
    let traj = integrate(&state, &params, &spec.evolution)?;
    let label = classify_trajectory(&traj, params.chi_n(), Some(cell.angle), &spec.thresholds)?;
    cell.phase = label.phase.to_string();
    if let PhaseDetail::Trajectory(m) = label.detail {
        cell.values = vec![
            m.mean_abs,
            m.amplitude,
            m.min_abs,
            m.omega_osc.unwrap_or(f64::NAN),
            m.decay_exponent.unwrap_or(f64::NAN),
            m.jz_max,
        ];
    }
    Ok(cell)
}

fn eval_cavity_cell(spec: &SweepSpec, i: usize, j: usize) -> Result<Cell> {
    let mut cell = Cell::new(spec, i, j);
    let run_spec = CavityRunSpec {
        angle: cell.angle,
        eps0_over_chi_n: cell.eps0_over_chi_n,
        w_over_chi_n: cell.w_over_chi_n,
        splitting: splitting_for(spec, i, j),
    };
    let run = run_cavity_experiment(&run_spec, &spec.cavity, &spec.evolution)?;
    let s = field_spectrum(&run, &spec.cavity, Window::LAST_HALF, &spec.spectrum)?;
    let peak = |k: usize| {
        s.peaks
            .get(k)
            .map_or((f64::NAN, f64::NAN), |p| (p.frequency, p.amplitude))
    };
    let (f1, a1) = peak(0);
    let (f2, a2) = peak(1);
    let field = run.field();
    let tail = &field[Window::LAST_HALF.range(field.len())?];
    let scale = (spec.cavity.field_prefactor() * spec.cavity.n_true).norm();
    let mean_abs_a = tail.iter().map(|z| z.norm()).sum::<f64>() / tail.len() as f64 / scale;
    cell.values = vec![count_peaks(&s, 0.1) as f64, f1, a1, f2, a2, mean_abs_a];
    Ok(cell)
}

fn eval_unit(spec: &SweepSpec, unit: &Unit) -> Vec<Cell> {
    match spec.engine {
        Engine::Lax => eval_lax_unit(spec, unit),
        Engine::Trajectory | Engine::Cavity => unit
            .cells
            .iter()
            .map(|&(i, j)| {
                let r = if spec.engine == Engine::Trajectory {
                    eval_trajectory_cell(spec, i, j)
                } else {
                    eval_cavity_cell(spec, i, j)
                };
                r.unwrap_or_else(|e| Cell::new(spec, i, j).fail(e))
            })
            .collect(),
    }
}

/// Evaluates the whole grid in memory on `workers` threads.
pub fn evaluate(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    spec.validate()?;
    run_units(spec, workers, &HashMap::new(), None)
}

fn run_units(
    spec: &SweepSpec,
    workers: usize,
    done: &HashMap<(usize, usize), Cell>,
    sink: Option<&Mutex<File>>,
) -> Result<SweepResult> {
    let todo: Vec<Unit> = units(spec)
        .into_iter()
        .filter(|u| !u.cells.iter().all(|c| done.contains_key(c)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let fresh: Vec<Vec<Cell>> = pool.install(|| {
        todo.par_iter()
            .map(|u| {
                let cells = eval_unit(spec, u);
                if let Some(sink) = sink {
                    let mut text = Vec::new();
                    {
                        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut text);
                        for c in &cells {
                            // writing into a Vec cannot fail
                            let _ = w.write_record(c.record());
                        }
                        let _ = w.flush();
                    }
                    if let Ok(mut f) = sink.lock() {
                        let _ = f.write_all(&text).and_then(|_| f.flush());
                    }
                }
                cells
            })
            .collect()
    });
    let mut map = done.clone();
    for c in fresh.into_iter().flatten() {
        map.insert((c.i, c.j), c);
    }
    let (ni, nj) = spec.shape();
    let cells = (0..ni)
        .flat_map(|i| (0..nj).map(move |j| (i, j)))
        .map(|k| {
            map.remove(&k)
                .ok_or_else(|| Error::InvalidInput(format!("cell {k:?} missing")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { shape: (ni, nj), cells })
}

fn partial_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Manifest path for a grid CSV: `grid.csv` → `grid.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}

fn read_partial(spec: &SweepSpec, path: &Path) -> Result<HashMap<(usize, usize), Cell>> {
    let mut done = HashMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(e.into()),
    };
    let n = spec.value_columns().len();
    let (ni, nj) = spec.shape();
    for line in BufReader::new(file).lines() {
        let line = line?;
        // a torn final line from an interrupted write is skipped
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(line.as_bytes());
        if let Some(Ok(rec)) = r.records().next() {
            if let Ok(c) = Cell::from_record(&rec, n) {
                if c.i < ni && c.j < nj {
                    done.insert((c.i, c.j), c);
                }
            }
        }
    }
    Ok(done)
}

/// Runs the sweep and writes `output` plus its manifest.
///
/// With `resume`, cells found in `<output>.partial` from an earlier run of the
/// same spec are reused; a spec mismatch with the existing manifest is an error.
pub fn run_sweep(spec: &SweepSpec, resume: bool) -> Result<(SweepResult, Manifest)> {
    spec.validate()?;
    let output = spec.output.clone().ok_or_else(|| Error::Config {
        path: "output".into(),
        msg: "required to run a sweep".into(),
    })?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let manifest_file = manifest_path(&output);
    let partial = partial_path(&output);
    let done = if resume {
        let mut checked = false;
        if let Ok(text) = fs::read_to_string(&manifest_file) {
            let previous: Manifest = serde_json::from_str(&text)?;
            if !same_grid(&previous.spec, spec) {
                return Err(Error::InvalidInput(format!(
                    "{} was written by a different sweep spec",
                    manifest_file.display()
                )));
            }
            checked = true;
        }
        if checked && !partial.exists() && output.exists() {
            // a finished run: every cell comes from the table
            let table = SweepResult::read_csv(spec, &output)?;
            table.cells.into_iter().map(|c| ((c.i, c.j), c)).collect()
        } else {
            read_partial(spec, &partial)?
        }
    } else {
        let _ = fs::remove_file(&partial);
        HashMap::new()
    };
    let resumed = done.len();
    // the manifest is written first so a resumed run can check the spec
    let workers = spec.resolved_workers();
    let mut manifest = Manifest {
        spec: spec.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        workers,
        wall_time_s: 0.0,
        cells: spec.shape().0 * spec.shape().1,
        undetermined: 0,
        resumed_cells: resumed,
    };
    fs::write(&manifest_file, serde_json::to_string_pretty(&manifest)?)?;

    let start = Instant::now();
    let sink = Mutex::new(OpenOptions::new().create(true).append(true).open(&partial)?);
    let result = run_units(spec, workers, &done, Some(&sink))?;
    result.write_csv(spec, File::create(&output)?)?;
    fs::remove_file(&partial)?;

    manifest.wall_time_s = start.elapsed().as_secs_f64();
    manifest.undetermined = result.cells.iter().filter(|c| c.phase == UNDETERMINED).count();
    fs::write(&manifest_file, serde_json::to_string_pretty(&manifest)?)?;
    Ok((result, manifest))
}

/// True if two specs evaluate the same grid (worker count and output aside).
fn same_grid(a: &SweepSpec, b: &SweepSpec) -> bool {
    let strip = |s: &SweepSpec| SweepSpec {
        workers: None,
        output: None,
        ..s.clone()
    };
    strip(a) == strip(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn lax_spec() -> SweepSpec {
        SweepSpec::from_json(
            r#"{
                "engine": "lax",
                "axes": [
                    {"param": "angle", "start": 0.0, "end": 3.141592653589793, "points": 4},
                    {"param": "w_over_chi_n", "start": 0.05, "end": 5.0, "points": 6, "spacing": "log"}
                ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn axis_values_linear_and_log() {
        let lin = Axis {
            param: Param::Angle,
            start: 0.0,
            end: PI,
            points: 3,
            spacing: Spacing::Linear,
        };
        assert_eq!(lin.values(), vec![0.0, 0.5 * PI, PI]);
        let log = Axis {
            param: Param::WOverChiN,
            start: 0.01,
            end: 1.0,
            points: 3,
            spacing: Spacing::Log,
        };
        let v = log.values();
        assert!((v[1] - 0.1).abs() < 1e-15 && (v[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_key_reports_path() {
        let err = SweepSpec::from_json(
            r#"{"engine": "lax", "axes": [{"param": "angle", "start": 0, "end": 1, "points": 2, "bogus": 1}]}"#,
        )
        .unwrap_err();
        match err {
            Error::Config { path, msg } => {
                assert_eq!(path, "axes[0].bogus");
                assert!(msg.contains("bogus"), "{msg}");
            }
            e => panic!("{e}"),
        }
        let err = SweepSpec::from_json(r#"{"engine": "lax", "axes": [], "fixed": {"nope": 1}}"#).unwrap_err();
        assert!(
            matches!(err, Error::Config { ref path, .. } if path == "fixed.nope"),
            "{err}"
        );
    }

    #[test]
    fn invalid_specs_rejected() {
        let one = r#"{"param": "angle", "start": 0, "end": 1, "points": 2}"#;
        for bad in [
            r#"{"engine": "lax", "axes": []}"#.to_string(),
            format!(r#"{{"engine": "lax", "axes": [{one}, {one}, {one}]}}"#),
            format!(r#"{{"engine": "lax", "axes": [{one}, {one}]}}"#),
            r#"{"engine": "lax", "axes": [{"param": "angle", "start": 0, "end": 1, "points": 1}]}"#.to_string(),
            r#"{"engine": "lax", "axes": [{"param": "w_over_chi_n", "start": 0, "end": 1, "points": 3, "spacing": "log"}]}"#
                .to_string(),
            r#"{"schema_version": 9, "engine": "lax", "axes": [{"param": "angle", "start": 0, "end": 1, "points": 2}]}"#
                .to_string(),
        ] {
            assert!(SweepSpec::from_json(&bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn lax_rows_follow_the_w_axis() {
        let spec = lax_spec();
        let u = units(&spec);
        assert_eq!(u.len(), 4);
        assert!(u.iter().all(|r| r.cells.len() == 6));
        assert_eq!(u[2].cells[5], (2, 5));
    }

    #[test]
    fn lax_grid_is_independent_of_worker_count() {
        let spec = lax_spec();
        let one = evaluate(&spec, 1).unwrap();
        let three = evaluate(&spec, 3).unwrap();
        let csv = |r: &SweepResult| {
            let mut v = Vec::new();
            r.write_csv(&spec, &mut v).unwrap();
            v
        };
        assert_eq!(csv(&one), csv(&three));
        // W = 5 lies beyond the I boundary π at Δφ₀ = π but below 2π at Δφ₀ = 0
        assert_eq!(one.get(3, 5).phase, "I");
        assert_eq!(one.get(0, 5).phase, "II");
        assert!(one.get(3, 0).phase.starts_with("III"), "{:?}", one.get(3, 0));
    }

    #[test]
    fn failed_cells_are_undetermined() {
        // a zero-length run is rejected by the classifier
        let spec = SweepSpec::from_json(
            r#"{"engine": "trajectory", "axes": [{"param": "angle", "start": 0, "end": 1, "points": 2}],
                "fixed": {"n_per_ensemble": 4}, "evolution": {"t_max": 5, "dt_initial": 0.001, "rel_tol": 1e-6,
                "abs_tol": 1e-8, "n_samples": 64}}"#,
        )
        .unwrap();
        let r = evaluate(&spec, 1).unwrap();
        assert!(r.cells.iter().all(|c| c.phase == UNDETERMINED && !c.reason.is_empty()));
    }

    #[test]
    fn resume_reuses_partial_cells_and_matches_a_fresh_run() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = lax_spec();
        spec.output = Some(dir.path().join("grid.csv"));
        let (fresh, _) = run_sweep(&spec, false).unwrap();
        let full = fs::read(dir.path().join("grid.csv")).unwrap();

        // simulate an interruption after two rows, with a torn last line
        let mut partial = Vec::new();
        {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut partial);
            for c in fresh.cells.iter().filter(|c| c.i < 2) {
                w.write_record(c.record()).unwrap();
            }
        }
        partial.extend_from_slice(b"3,0,0.1");
        fs::write(partial_path(spec.output.as_ref().unwrap()), partial).unwrap();
        let (_, manifest) = run_sweep(&spec, true).unwrap();
        assert_eq!(manifest.resumed_cells, 12);
        assert_eq!(fs::read(dir.path().join("grid.csv")).unwrap(), full);

        // resuming a finished run reuses the table
        let (_, manifest) = run_sweep(&spec, true).unwrap();
        assert_eq!(manifest.resumed_cells, manifest.cells);
        assert_eq!(fs::read(dir.path().join("grid.csv")).unwrap(), full);

        let mut other = spec.clone();
        other.fixed.eps0_over_chi_n = 0.2;
        fs::write(partial_path(spec.output.as_ref().unwrap()), b"").unwrap();
        assert!(run_sweep(&other, true).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let spec = lax_spec();
        let r = evaluate(&spec, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        r.write_csv(&spec, File::create(&path).unwrap()).unwrap();
        let back = SweepResult::read_csv(&spec, &path).unwrap();
        assert_eq!(back.cells.len(), r.cells.len());
        for (a, b) in back.cells.iter().zip(&r.cells) {
            assert_eq!(a.phase, b.phase);
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!(x == y || (x.is_nan() && y.is_nan()));
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn axis_values_span_the_range_in_order(a in 0.01f64..10.0, span in 0.01f64..10.0, n in 2usize..200, log in proptest::bool::ANY) {
            let axis = Axis {
                param: Param::WOverChiN,
                start: a,
                end: a + span,
                points: n,
                spacing: if log { Spacing::Log } else { Spacing::Linear },
            };
            let v = axis.values();
            proptest::prop_assert_eq!(v.len(), n);
            proptest::prop_assert!((v[0] / a - 1.0).abs() < 1e-14);
            proptest::prop_assert!((v[n - 1] / (a + span) - 1.0).abs() < 1e-14);
            proptest::prop_assert!(v.windows(2).all(|p| p[1] > p[0]));
        }
    }
}
