//! Mean-field Bloch equations with optional coupling weights and decay.
//!
//! Each spin precesses about its effective field, `dσ⃗ⱼ/dt = B⃗ⱼ × σ⃗ⱼ`, with
//! `B⃗ⱼ = (sχ gⱼ Sˣ, sχ gⱼ Sʸ, 2εⱼ)`, `S^a = Σₖ gₖ σ^a_k` (self-term kept) and
//! `s = −1` for the attractive sign. Spontaneous emission at rate `γ` adds
//! `dσ^{x,y}/dt −= (γ/2)σ^{x,y}` and `dσᶻ/dt −= γ(σᶻ + 1)`.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bloch, ModelParams, SpinState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    /// Final time, in the time units of `1/χ` (so `200/(χN)` is 200 when `χN = 1`).
    pub t_max: f64,
    pub dt_initial: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Number of uniformly spaced output samples including `t = 0` and `t_max`.
    pub n_samples: usize,
    pub gamma: f64,
    /// Keep every n-th sample's full spin configuration; 0 keeps none.
    pub snapshot_every: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            t_max: 200.0,
            dt_initial: 1e-3,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            n_samples: 4096,
            gamma: 0.0,
            snapshot_every: 0,
        }
    }
}

impl EvolutionConfig {
    /// Defaults with times measured as multiples of `1/(χN)`.
    pub fn for_chi_n(chi_n: f64, t_max_times_chi_n: f64) -> Self {
        EvolutionConfig {
            t_max: t_max_times_chi_n / chi_n,
            dt_initial: 1e-3 / chi_n,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be > 0, got {}", self.t_max));
        }
        if !(self.dt_initial > 0.0) {
            return bad(format!("dt_initial must be > 0, got {}", self.dt_initial));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be > 0".into());
        }
        if self.n_samples < 2 {
            return bad(format!("n_samples must be >= 2, got {}", self.n_samples));
        }
        if !(self.gamma >= 0.0) {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        Ok(())
    }

    pub fn sample_dt(&self) -> f64 {
        self.t_max / (self.n_samples - 1) as f64
    }
}

/// Sampled time series of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `Δ(t) = χ Σⱼ gⱼ σ⁻ⱼ(t)`.
    pub delta: Vec<Complex64>,
    pub jz: Vec<f64>,
    pub energy: Vec<f64>,
    pub mean_norm: Vec<f64>,
    pub max_norm_deviation: Vec<f64>,
    pub snapshots: Vec<(f64, Vec<Bloch>)>,
    /// Intracavity field `a(t)`, filled in by the cavity layer.
    pub field: Option<Vec<Complex64>>,
    pub final_state: SpinState,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn abs_delta(&self) -> Vec<f64> {
        self.delta.iter().map(|d| d.norm()).collect()
    }

    pub fn sample_dt(&self) -> f64 {
        if self.times.len() < 2 {
            return 0.0;
        }
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }

    pub fn to_table(&self) -> TrajectoryTable {
        TrajectoryTable {
            t: self.times.clone(),
            re_delta: self.delta.iter().map(|d| d.re).collect(),
            im_delta: self.delta.iter().map(|d| d.im).collect(),
            abs_delta: self.abs_delta(),
            jz: self.jz.clone(),
            energy: self.energy.clone(),
            mean_norm: self.mean_norm.clone(),
            re_a: self.field.as_ref().map(|f| f.iter().map(|a| a.re).collect()),
            im_a: self.field.as_ref().map(|f| f.iter().map(|a| a.im).collect()),
            abs_a_sq: self.field.as_ref().map(|f| f.iter().map(|a| a.norm_sqr()).collect()),
        }
    }
}

/// Column view of a trajectory; this is the export and import format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryTable {
    pub t: Vec<f64>,
    pub re_delta: Vec<f64>,
    pub im_delta: Vec<f64>,
    pub abs_delta: Vec<f64>,
    pub jz: Vec<f64>,
    pub energy: Vec<f64>,
    pub mean_norm: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re_a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im_a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_a_sq: Option<Vec<f64>>,
}

const BASE_COLUMNS: [&str; 7] = ["t", "re_delta", "im_delta", "abs_delta", "jz", "energy", "mean_norm"];
const FIELD_COLUMNS: [&str; 3] = ["re_a", "im_a", "abs_a_sq"];

impl TrajectoryTable {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn delta(&self) -> Vec<Complex64> {
        self.re_delta
            .iter()
            .zip(&self.im_delta)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect()
    }

    pub fn field(&self) -> Option<Vec<Complex64>> {
        match (&self.re_a, &self.im_a) {
            (Some(re), Some(im)) => Some(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect()),
            _ => None,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let has_field = self.re_a.is_some();
        let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
        if has_field {
            header.extend(FIELD_COLUMNS);
        }
        w.write_record(&header)?;
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            row.clear();
            for col in [
                &self.t,
                &self.re_delta,
                &self.im_delta,
                &self.abs_delta,
                &self.jz,
                &self.energy,
                &self.mean_norm,
            ] {
                row.push(format!("{:e}", col[i]));
            }
            if let (Some(re), Some(im), Some(sq)) = (&self.re_a, &self.im_a, &self.abs_a_sq) {
                row.extend([re[i], im[i], sq[i]].iter().map(|v| format!("{v:e}")));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let index = |name: &str| header.iter().position(|h| h == name);
        let mut base = Vec::with_capacity(BASE_COLUMNS.len());
        for name in BASE_COLUMNS {
            base.push(index(name).ok_or_else(|| Error::InvalidInput(format!("missing column `{name}`")))?);
        }
        let field_idx: Option<Vec<usize>> = FIELD_COLUMNS.iter().map(|n| index(n)).collect();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); BASE_COLUMNS.len() + FIELD_COLUMNS.len()];
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let parse = |i: usize| -> Result<f64> {
                let s = record.get(i).unwrap_or("");
                s.trim()
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("row {}: cannot parse `{s}`", line + 2)))
            };
            for (k, &i) in base.iter().enumerate() {
                cols[k].push(parse(i)?);
            }
            if let Some(f) = &field_idx {
                for (k, &i) in f.iter().enumerate() {
                    cols[BASE_COLUMNS.len() + k].push(parse(i)?);
                }
            }
        }
        let mut it = cols.into_iter();
        let mut next = || it.next().unwrap_or_default();
        let (t, re_delta, im_delta, abs_delta, jz, energy, mean_norm) =
            (next(), next(), next(), next(), next(), next(), next());
        let (re_a, im_a, abs_a_sq) = if field_idx.is_some() {
            (Some(next()), Some(next()), Some(next()))
        } else {
            (None, None, None)
        };
        Ok(TrajectoryTable {
            t,
            re_delta,
            im_delta,
            abs_delta,
            jz,
            energy,
            mean_norm,
            re_a,
            im_a,
            abs_a_sq,
        })
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => self.write_json(file),
            _ => self.write_csv(file),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(serde_json::from_reader(file)?),
            _ => Self::read_csv(file),
        }
    }
}

/// Per-spin data entering the right-hand side, in flat layout.
struct Rhs<'a> {
    eps: &'a [f64],
    g: &'a [f64],
    signed_chi: f64,
    gamma: f64,
}

impl Rhs<'_> {
    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        let (mut sx, mut sy) = (0.0, 0.0);
        for (s, g) in y.chunks_exact(3).zip(self.g) {
            sx += g * s[0];
            sy += g * s[1];
        }
        let half_gamma = 0.5 * self.gamma;
        for (((s, d), e), g) in y.chunks_exact(3).zip(dy.chunks_exact_mut(3)).zip(self.eps).zip(self.g) {
            let bx = self.signed_chi * g * sx;
            let by = self.signed_chi * g * sy;
            let bz = 2.0 * e;
            d[0] = by * s[2] - bz * s[1] - half_gamma * s[0];
            d[1] = bz * s[0] - bx * s[2] - half_gamma * s[1];
            d[2] = bx * s[1] - by * s[0] - self.gamma * (s[2] + 1.0);
        }
    }
}

fn flatten(sigma: &[Bloch]) -> Vec<f64> {
    sigma.iter().flat_map(|s| s.iter().copied()).collect()
}

fn unflatten(y: &[f64]) -> Vec<Bloch> {
    y.chunks_exact(3).map(|s| [s[0], s[1], s[2]]).collect()
}

/// Time derivative of every Bloch vector.
pub fn bloch_rhs(state: &SpinState, params: &ModelParams, gamma: f64) -> Vec<Bloch> {
    let y = flatten(&state.sigma);
    let mut dy = vec![0.0; y.len()];
    Rhs {
        eps: &state.eps,
        g: &state.g_weight,
        signed_chi: params.signed_chi(),
        gamma,
    }
    .eval(&y, &mut dy);
    unflatten(&dy)
}

/// Mean-field energy `sχ|Σⱼ gⱼσ⁻ⱼ|² + Σⱼ εⱼσᶻⱼ`.
pub fn energy(state: &SpinState, params: &ModelParams) -> f64 {
    let pairing = params.signed_chi() * state.s_minus().norm_sqr();
    pairing + state.sigma.iter().zip(&state.eps).map(|(s, e)| e * s[2]).sum::<f64>()
}

/// `J_z = (Σ_{j∈+} σᶻⱼ − Σ_{j∈−} σᶻⱼ)/2`.
pub fn differential_inversion(state: &SpinState) -> f64 {
    0.5 * state
        .sigma
        .iter()
        .zip(&state.ensemble)
        .map(|(s, tag)| tag.sign() * s[2])
        .sum::<f64>()
}

/// Dormand–Prince 5(4) tableau.
mod tableau {
    pub const A21: f64 = 1.0 / 5.0;
    pub const A31: f64 = 3.0 / 40.0;
    pub const A32: f64 = 9.0 / 40.0;
    pub const A41: f64 = 44.0 / 45.0;
    pub const A42: f64 = -56.0 / 15.0;
    pub const A43: f64 = 32.0 / 9.0;
    pub const A51: f64 = 19372.0 / 6561.0;
    pub const A52: f64 = -25360.0 / 2187.0;
    pub const A53: f64 = 64448.0 / 6561.0;
    pub const A54: f64 = -212.0 / 729.0;
    pub const A61: f64 = 9017.0 / 3168.0;
    pub const A62: f64 = -355.0 / 33.0;
    pub const A63: f64 = 46732.0 / 5247.0;
    pub const A64: f64 = 49.0 / 176.0;
    pub const A65: f64 = -5103.0 / 18656.0;
    pub const B1: f64 = 35.0 / 384.0;
    pub const B3: f64 = 500.0 / 1113.0;
    pub const B4: f64 = 125.0 / 192.0;
    pub const B5: f64 = -2187.0 / 6784.0;
    pub const B6: f64 = 11.0 / 84.0;
    pub const E1: f64 = 71.0 / 57600.0;
    pub const E3: f64 = -71.0 / 16695.0;
    pub const E4: f64 = 71.0 / 1920.0;
    pub const E5: f64 = -17253.0 / 339200.0;
    pub const E6: f64 = 22.0 / 525.0;
    pub const E7: f64 = -1.0 / 40.0;
}

/// Adaptive 5(4) integration of an autonomous system, landing exactly on each
/// requested sample time. `observe` sees the state at every sample, including
/// the initial one.
pub(crate) fn dopri5<F, O>(
    mut f: F,
    y: &mut [f64],
    samples: &[f64],
    h0: f64,
    rel_tol: f64,
    abs_tol: f64,
    mut observe: O,
) -> Result<()>
where
    F: FnMut(&[f64], &mut [f64]),
    O: FnMut(usize, &[f64]),
{
    use tableau::*;
    let n = y.len();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let mut y5 = vec![0.0; n];

    let mut t = samples.first().copied().unwrap_or(0.0);
    observe(0, y);
    f(y, &mut k[0]);
    let mut h = h0;

    for (idx, &target) in samples.iter().enumerate().skip(1) {
        while t < target {
            let remaining = target - t;
            let clamped = h >= remaining;
            let h_try = if clamped { remaining } else { h };

            macro_rules! combo {
                ($dst:expr, $($c:expr => $ki:expr),+) => {
                    for i in 0..n {
                        $dst[i] = y[i] + h_try * (0.0 $(+ $c * k[$ki][i])+);
                    }
                };
            }
            combo!(stage, A21 => 0);
            f(&stage, &mut k[1]);
            combo!(stage, A31 => 0, A32 => 1);
            f(&stage, &mut k[2]);
            combo!(stage, A41 => 0, A42 => 1, A43 => 2);
            f(&stage, &mut k[3]);
            combo!(stage, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
            f(&stage, &mut k[4]);
            combo!(stage, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
            f(&stage, &mut k[5]);
            combo!(y5, B1 => 0, B3 => 2, B4 => 3, B5 => 4, B6 => 5);
            f(&y5, &mut k[6]);

            let mut acc = 0.0;
            for i in 0..n {
                let e =
                    h_try * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
                let scale = abs_tol + rel_tol * y[i].abs().max(y5[i].abs());
                acc += (e / scale) * (e / scale);
            }
            let err = (acc / n as f64).sqrt();

            if err <= 1.0 {
                t = if clamped { target } else { t + h_try };
                y.copy_from_slice(&y5);
                k.swap(0, 6);
                let grow = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).min(5.0)
                };
                let proposal = h_try * grow;
                h = if clamped { h.max(proposal) } else { proposal };
            } else {
                let shrink = if err.is_finite() {
                    (0.9 * err.powf(-0.2)).max(0.2)
                } else {
                    0.2
                };
                h = h_try * shrink;
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepUnderflow { t, h });
                }
            }
        }
        observe(idx, y);
    }
    Ok(())
}

/// Integrates the Bloch equations from `state0` and records the collective
/// observables at `config.n_samples` uniformly spaced times.
pub fn integrate(state0: &SpinState, params: &ModelParams, config: &EvolutionConfig) -> Result<Trajectory> {
    config.validate()?;
    let n_spins = state0.len();
    if state0.eps.len() != n_spins || state0.g_weight.len() != n_spins || state0.ensemble.len() != n_spins {
        return Err(Error::InvalidInput("state arrays have inconsistent lengths".into()));
    }
    let rhs = Rhs {
        eps: &state0.eps,
        g: &state0.g_weight,
        signed_chi: params.signed_chi(),
        gamma: config.gamma,
    };
    let dt = config.sample_dt();
    let samples: Vec<f64> = (0..config.n_samples)
        .map(|k| {
            if k + 1 == config.n_samples {
                config.t_max
            } else {
                k as f64 * dt
            }
        })
        .collect();

    let m = config.n_samples;
    let mut delta = Vec::with_capacity(m);
    let mut jz = Vec::with_capacity(m);
    let mut en = Vec::with_capacity(m);
    let mut mean_norm = Vec::with_capacity(m);
    let mut max_dev = Vec::with_capacity(m);
    let mut snapshots = Vec::new();

    let mut scratch = state0.clone();
    let mut y = flatten(&state0.sigma);
    dopri5(
        |y, dy| rhs.eval(y, dy),
        &mut y,
        &samples,
        config.dt_initial,
        config.rel_tol,
        config.abs_tol,
        |idx, y| {
            for (dst, src) in scratch.sigma.iter_mut().zip(y.chunks_exact(3)) {
                *dst = [src[0], src[1], src[2]];
            }
            delta.push(params.chi * scratch.s_minus());
            jz.push(differential_inversion(&scratch));
            en.push(energy(&scratch, params));
            mean_norm.push(scratch.mean_norm());
            max_dev.push(scratch.max_norm_deviation());
            if config.snapshot_every > 0 && idx % config.snapshot_every == 0 {
                snapshots.push((samples[idx], scratch.sigma.clone()));
            }
        },
    )?;
    scratch.sigma = unflatten(&y);

    Ok(Trajectory {
        times: samples,
        delta,
        jz,
        energy: en,
        mean_norm,
        max_norm_deviation: max_dev,
        snapshots,
        field: None,
        final_state: scratch,
    })
}
