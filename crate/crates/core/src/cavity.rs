//! Cavity-QED realization of the two-ensemble model.
//!
//! Atoms sit on lattice sites `j = 1…2N` and couple to the cavity mode with
//! `gⱼ = g cos(k_d j)`. Adiabatic elimination of the mode gives pairwise
//! couplings `χᵢⱼ = −gᵢgⱼ/δ_c`, i.e. `χ = g²/|δ_c|` with coupling weights
//! `cos(k_d j)`, attractive for `δ_c < 0`. The intracavity field is
//! `a = −2/(2δ_c − iκ) Σⱼ gⱼσ⁻ⱼ`.
//!
//! Simulations run `n_sim` spins per ensemble in units where the physical
//! collective scale `χN` (with `N = n_true`) is one; [`run_cavity_experiment`]
//! converts the result back to seconds and radians per second.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, EvolutionConfig, Trajectory};
use crate::error::{Error, Result};
use crate::model::{sample_splittings, CouplingSign, ModelParams, SpinState, SplittingKind, SplittingSpec};
use crate::observables::{spectrum_complex, SpectrumOptions, SpectrumResult, Window};

const TWO_PI: f64 = 2.0 * PI;

/// Assignment of the two ensembles to lattice sites.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// `+` on odd sites, `−` on even sites.
    #[default]
    Interleaved,
    /// `+` on sites `1…N`, `−` on `N+1…2N`.
    Blocked,
}

impl Layout {
    /// Lattice site of the `k`-th spin of a state whose first `n` entries are
    /// the `+` ensemble.
    pub fn site(self, k: usize, n: usize) -> usize {
        match self {
            Layout::Interleaved if k < n => 2 * k + 1,
            Layout::Interleaved => 2 * (k - n) + 2,
            Layout::Blocked => k + 1,
        }
    }
}

/// Physical parameters. Rates are angular frequencies in rad/s, wavelengths in nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CavityParams {
    pub g: f64,
    pub gamma: f64,
    pub delta_c: f64,
    pub kappa: f64,
    pub lambda_lattice: f64,
    pub lambda_cavity: f64,
    /// Simulated spins per ensemble.
    pub n_sim: usize,
    /// Physical atoms per ensemble that results are rescaled to.
    pub n_true: f64,
    /// Drive Rabi frequency; `None` is an instantaneous pulse.
    pub omega0: Option<f64>,
    pub layout: Layout,
}

impl Default for CavityParams {
    fn default() -> Self {
        CavityParams {
            g: TWO_PI * 10.9e3,
            gamma: TWO_PI * 7.5e3,
            delta_c: TWO_PI * -50e6,
            kappa: TWO_PI * 153e3,
            lambda_lattice: 813.0,
            lambda_cavity: 689.0,
            n_sim: 500,
            n_true: 1e6,
            omega0: None,
            layout: Layout::Interleaved,
        }
    }
}

impl CavityParams {
    /// `k_d = π λ_L / λ_c`.
    pub fn k_d(&self) -> f64 {
        PI * self.lambda_lattice / self.lambda_cavity
    }

    /// `χ = g²/|δ_c|` in rad/s.
    pub fn chi(&self) -> f64 {
        self.g * self.g / self.delta_c.abs()
    }

    /// Physical collective scale `χN` with `N = n_true`, in rad/s.
    pub fn chi_n(&self) -> f64 {
        self.chi() * self.n_true
    }

    pub fn sign(&self) -> CouplingSign {
        if self.delta_c < 0.0 {
            CouplingSign::Attractive
        } else {
            CouplingSign::Repulsive
        }
    }

    /// Field per unit `Σⱼ (gⱼ/g) σ⁻ⱼ` of the physical system: `−2g/(2δ_c − iκ)`.
    pub fn field_prefactor(&self) -> Complex64 {
        -2.0 * self.g / Complex64::new(2.0 * self.delta_c, -self.kappa)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        for (name, v) in [
            ("g", self.g),
            ("kappa", self.kappa),
            ("lambda_lattice", self.lambda_lattice),
            ("lambda_cavity", self.lambda_cavity),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.gamma >= 0.0) {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if self.n_sim == 0 {
            return bad("n_sim must be >= 1".into());
        }
        if !(self.n_true >= self.n_sim as f64) {
            return bad(format!("n_true = {} is below n_sim = {}", self.n_true, self.n_sim));
        }
        let collective = self.g * (2.0 * self.n_true).sqrt();
        if !(self.delta_c.abs() > collective) {
            return bad(format!(
                "|delta_c| = {:.4e} must exceed g*sqrt(2N) = {collective:.4e} for adiabatic elimination",
                self.delta_c.abs()
            ));
        }
        if let Some(w) = self.omega0 {
            if !(w > 0.0) {
                return bad(format!("omega0 must be > 0, got {w}"));
            }
        }
        Ok(())
    }
}

/// `gⱼ/g = cos(k_d j)` for `j = 1…n`.
pub fn coupling_weights(n: usize, k_d: f64) -> Vec<f64> {
    (1..=n).map(|j| (k_d * j as f64).cos()).collect()
}

/// Realistic initial state: every spin starts in `|↓⟩`, a pulse of area
/// `θⱼ = (π/2)cos(k_d j)` rotates it about `ŷ`, then the ensembles are turned
/// by `±Δφ₀/2` about `ẑ`.
///
/// `splittings` holds the `+` ensemble first; its length fixes `2N`.
pub fn prepare_cavity_state(angle: f64, params: &CavityParams, splittings: &[f64]) -> Result<SpinState> {
    if !(angle.abs() <= PI + 1e-12) {
        return Err(Error::InvalidInput(format!("angle {angle} outside [-pi, pi]")));
    }
    let total = splittings.len();
    let mut state = SpinState::new(vec![[0.0, 0.0, -1.0]; total], splittings.to_vec())?;
    let n = total / 2;
    let k_d = params.k_d();
    let (s, c) = (0.5 * angle).sin_cos();
    for k in 0..total {
        let w = (k_d * params.layout.site(k, n) as f64).cos();
        let theta = FRAC_PI_2 * w;
        let pm = state.ensemble[k].sign();
        state.sigma[k] = [theta.sin() * c, pm * theta.sin() * s, -theta.cos()];
        state.g_weight[k] = w;
    }
    Ok(state)
}

/// Intracavity field of `state`, rescaled from its `N` spins per ensemble to
/// `params.n_true`.
pub fn intracavity_field(state: &SpinState, params: &CavityParams) -> Complex64 {
    let scale = params.n_true / state.n_per_ensemble() as f64;
    params.field_prefactor() * scale * state.s_minus()
}

/// One realistic run in the dimensionless parameters of the ideal model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityRunSpec {
    pub angle: f64,
    /// `ε₀/(χN)` with the bare `χ = g²/|δ_c|`.
    pub eps0_over_chi_n: f64,
    pub w_over_chi_n: f64,
    #[serde(default)]
    pub splitting: SplittingKind,
}

/// Result of [`run_cavity_experiment`] in physical units: times in seconds,
/// `Δ` and energy in rad/s, `a` dimensionless.
#[derive(Debug, Clone)]
pub struct CavityRun {
    pub trajectory: Trajectory,
    /// `χN` in rad/s; divide by it to return to the simulation's units.
    pub chi_n: f64,
}

impl CavityRun {
    pub fn field(&self) -> &[Complex64] {
        self.trajectory.field.as_deref().unwrap_or(&[])
    }
}

/// Prepares the realistic state and evolves it with weighted couplings and
/// spontaneous emission.
///
/// Times in `evolution` are in units of `1/(χN)`; its `gamma` is ignored in
/// favour of `params.gamma`.
pub fn run_cavity_experiment(
    spec: &CavityRunSpec,
    params: &CavityParams,
    evolution: &EvolutionConfig,
) -> Result<CavityRun> {
    params.validate()?;
    let n = params.n_sim;
    let chi_n = params.chi_n();
    // units with χ_true·n_true = 1: the simulated χ is 1/n_sim
    let model = ModelParams::new(1.0 / n as f64, n, spec.eps0_over_chi_n, spec.w_over_chi_n)?.with_sign(params.sign());
    let splittings = sample_splittings(&SplittingSpec {
        kind: spec.splitting,
        eps0: model.eps0,
        w: model.w,
        n,
    });
    let state = prepare_cavity_state(spec.angle, params, &splittings)?;
    let config = EvolutionConfig {
        gamma: params.gamma / chi_n,
        ..*evolution
    };
    let mut traj = integrate(&state, &model, &config)?;

    // Δ_sim = χ_sim Σ gσ⁻ = Σ_true gσ⁻ / n_true, so a = prefactor·n_true·Δ_sim
    let pref = params.field_prefactor() * params.n_true;
    traj.field = Some(traj.delta.iter().map(|d| pref * d).collect());
    let seconds = 1.0 / chi_n;
    for t in &mut traj.times {
        *t *= seconds;
    }
    for d in &mut traj.delta {
        *d *= chi_n;
    }
    for e in &mut traj.energy {
        *e *= chi_n;
    }
    for (t, _) in &mut traj.snapshots {
        *t *= seconds;
    }
    Ok(CavityRun {
        trajectory: traj,
        chi_n,
    })
}

/// Spectrum of `a(t)` over `window` in the units of the ideal model:
/// frequencies in units of `χN`, magnitudes and peak amplitudes relative to
/// `|a|` of a fully aligned, homogeneously coupled state, `|2g n_true/(2δ_c − iκ)|`.
pub fn field_spectrum(
    run: &CavityRun,
    params: &CavityParams,
    window: Window,
    opts: &SpectrumOptions,
) -> Result<SpectrumResult> {
    let field = run.field();
    let range = window.range(field.len())?;
    let dt = run.trajectory.sample_dt() * run.chi_n;
    let mut result = spectrum_complex(&field[range], dt, opts)?;
    let scale = (params.field_prefactor() * params.n_true).norm();
    for m in &mut result.magnitudes {
        *m /= scale;
    }
    for p in &mut result.peaks {
        p.height /= scale;
        p.prominence /= scale;
        p.amplitude /= scale;
    }
    Ok(result)
}

/// Peaks whose tone amplitude is at least `fraction` of the strongest one.
pub fn count_peaks(spectrum: &SpectrumResult, fraction: f64) -> usize {
    let top = spectrum.peaks.iter().map(|p| p.amplitude).fold(0.0, f64::max);
    spectrum
        .peaks
        .iter()
        .filter(|p| top > 0.0 && p.amplitude >= fraction * top)
        .count()
}

/// First point along `xs` where `values` falls below `fraction·values[0]`,
/// interpolated linearly in `ln(value)` between the bracketing samples.
pub fn disappearance_point(xs: &[f64], values: &[f64], fraction: f64) -> Option<f64> {
    let level = fraction * *values.first()?;
    if !(level > 0.0) {
        return None;
    }
    let k = values.iter().position(|v| *v < level)?;
    if k == 0 {
        return Some(xs[0]);
    }
    let (v0, v1) = (values[k - 1].max(f64::MIN_POSITIVE), values[k].max(f64::MIN_POSITIVE));
    let s = (level.ln() - v0.ln()) / (v1.ln() - v0.ln());
    Some(xs[k - 1] + s * (xs[k] - xs[k - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate;
    use crate::model::{prepare_initial_state, InitialStateSpec};
    use proptest::prelude::*;

    fn homogeneous() -> CavityParams {
        // k_d = π·λ_L/λ_c = 2π: every weight is one
        CavityParams {
            lambda_lattice: 2.0 * 689.0,
            n_sim: 50,
            n_true: 50.0,
            ..Default::default()
        }
    }

    #[test]
    fn default_parameters() {
        let p = CavityParams::default();
        p.validate().unwrap();
        assert!((p.k_d() - PI * 813.0 / 689.0).abs() < 1e-15);
        // χN = 2π × 2.376 MHz for N = 10⁶
        assert!((p.chi_n() / TWO_PI / 1e6 - 2.3762).abs() < 1e-3);
        assert_eq!(p.sign(), CouplingSign::Attractive);
    }

    #[test]
    fn adiabatic_condition_is_enforced() {
        let p = CavityParams {
            delta_c: TWO_PI * -1e6,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn weights_homogeneous_limit_and_mean_square() {
        assert!(coupling_weights(10, 0.0).iter().all(|w| *w == 1.0));
        let w = coupling_weights(10_000, CavityParams::default().k_d());
        assert!(w.iter().all(|x| x.abs() <= 1.0));
        let ms = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
        assert!((ms - 0.5).abs() < 0.01, "{ms}");
    }

    #[test]
    fn layouts_cover_every_site_once() {
        for layout in [Layout::Interleaved, Layout::Blocked] {
            let mut sites: Vec<usize> = (0..20).map(|k| layout.site(k, 10)).collect();
            sites.sort();
            assert_eq!(sites, (1..=20).collect::<Vec<_>>());
        }
        assert_eq!(Layout::Interleaved.site(0, 10), 1);
        assert_eq!(Layout::Interleaved.site(10, 10), 2);
    }

    #[test]
    fn homogeneous_pulse_gives_ideal_state() {
        let p = homogeneous();
        let eps: Vec<f64> = (0..100).map(|k| 0.01 * k as f64).collect();
        let angle = 1.234;
        let real = prepare_cavity_state(angle, &p, &eps).unwrap();
        let ideal = prepare_initial_state(&InitialStateSpec::Azimuthal { angle }, &eps).unwrap();
        for (a, b) in real.sigma.iter().zip(&ideal.sigma) {
            for i in 0..3 {
                assert!((a[i] - b[i]).abs() < 1e-12);
            }
        }
        assert!(real.g_weight.iter().all(|w| (w - 1.0).abs() < 1e-12));
    }

    /// Rotation about `ŷ` by `−θ` (the pulse phase that tips `|↓⟩` toward
    /// `+x̂`), then about `ẑ` by `φ`, as explicit matrices.
    fn rotate(theta: f64, phi: f64) -> [f64; 3] {
        let theta = -theta;
        let down = [0.0, 0.0, -1.0];
        let ry = [
            [theta.cos(), 0.0, theta.sin()],
            [0.0, 1.0, 0.0],
            [-theta.sin(), 0.0, theta.cos()],
        ];
        let rz = [
            [phi.cos(), -phi.sin(), 0.0],
            [phi.sin(), phi.cos(), 0.0],
            [0.0, 0.0, 1.0],
        ];
        let mul = |m: [[f64; 3]; 3], v: [f64; 3]| -> [f64; 3] {
            std::array::from_fn(|i| (0..3).map(|j| m[i][j] * v[j]).sum())
        };
        mul(rz, mul(ry, down))
    }

    #[test]
    fn generic_spins_match_rotation_matrices() {
        let p = CavityParams::default();
        let eps = vec![0.0; 40];
        let angle = 2.0;
        let s = prepare_cavity_state(angle, &p, &eps).unwrap();
        for k in 0..40 {
            let j = p.layout.site(k, 20) as f64;
            let theta = FRAC_PI_2 * (p.k_d() * j).cos();
            let pm = s.ensemble[k].sign();
            let expect = rotate(theta, pm * 0.5 * angle);
            for (got, want) in s.sigma[k].iter().zip(&expect) {
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_pulse_area_leaves_spin_down() {
        // choose k_d so that site 1 has cos(k_d) = 0
        let p = CavityParams {
            lambda_lattice: 0.5 * 689.0,
            layout: Layout::Blocked,
            ..Default::default()
        };
        let s = prepare_cavity_state(0.7, &p, &[0.0; 4]).unwrap();
        assert!(s.sigma[0][0].abs() < 1e-15 && s.sigma[0][1].abs() < 1e-15);
        assert!((s.sigma[0][2] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn field_of_aligned_state() {
        let p = homogeneous();
        let s = prepare_cavity_state(0.0, &p, &[0.0; 100]).unwrap();
        let a = intracavity_field(&s, &p);
        let expect = 2.0 / Complex64::new(2.0 * p.delta_c, -p.kappa).norm() * p.g * 50.0;
        assert!((a.norm() - expect).abs() < 1e-12 * expect);
        let down = SpinState::new(vec![[0.0, 0.0, -1.0]; 10], vec![0.0; 10]).unwrap();
        assert_eq!(intracavity_field(&down, &p), Complex64::new(0.0, 0.0));
    }

    proptest! {
        #[test]
        fn field_is_linear(alpha in -3.0f64..3.0, angle in -3.0f64..3.0) {
            let p = CavityParams::default();
            let s = prepare_cavity_state(angle, &p, &[0.1; 20]).unwrap();
            let mut scaled = s.clone();
            for v in &mut scaled.sigma {
                v[0] *= alpha;
                v[1] *= alpha;
            }
            let (a, b) = (intracavity_field(&s, &p), intracavity_field(&scaled, &p));
            prop_assert!((b - alpha * a).norm() <= 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn homogeneous_lossless_run_matches_ideal_model() {
        let p = CavityParams {
            gamma: 0.0,
            ..homogeneous()
        };
        let spec = CavityRunSpec {
            angle: 2.5,
            eps0_over_chi_n: 0.1,
            w_over_chi_n: 0.5,
            splitting: SplittingKind::EquallySpaced,
        };
        let evo = EvolutionConfig {
            t_max: 30.0,
            n_samples: 301,
            ..Default::default()
        };
        let run = run_cavity_experiment(&spec, &p, &evo).unwrap();

        let model = ModelParams::from_ratios(50, 0.1, 0.5).unwrap();
        let eps = sample_splittings(&model.splitting_spec(SplittingKind::EquallySpaced));
        let ideal = integrate(
            &prepare_initial_state(&InitialStateSpec::Azimuthal { angle: 2.5 }, &eps).unwrap(),
            &model,
            &evo,
        )
        .unwrap();
        for (k, d) in ideal.delta.iter().enumerate() {
            let t = run.trajectory.times[k] * run.chi_n;
            assert!((t - ideal.times[k]).abs() < 1e-9);
            assert!((run.trajectory.delta[k] / run.chi_n - d).norm() < 1e-9);
        }
    }

    #[test]
    fn free_decay_of_field() {
        // aligned spins without splittings feel no torque: |a| decays as e^{−γt/2}
        let p = CavityParams {
            n_sim: 10,
            n_true: 10.0,
            ..Default::default()
        };
        let spec = CavityRunSpec {
            angle: 0.0,
            eps0_over_chi_n: 0.0,
            w_over_chi_n: 0.0,
            splitting: SplittingKind::EquallySpaced,
        };
        let gamma_units = p.gamma / p.chi_n();
        let evo = EvolutionConfig {
            t_max: 3.0 / gamma_units,
            n_samples: 31,
            dt_initial: 1e-3 / gamma_units,
            ..Default::default()
        };
        let run = run_cavity_experiment(&spec, &p, &evo).unwrap();
        let a = run.field();
        for (t, ak) in run.trajectory.times.iter().zip(a) {
            let expect = a[0].norm() * (-0.5 * p.gamma * t).exp();
            assert!((ak.norm() - expect).abs() < 1e-6 * a[0].norm(), "{t}");
        }
    }

    #[test]
    fn disappearance_interpolates_in_log() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let v = [1.0, 0.5, 0.01, 0.001];
        // 0.1 lies between 0.5 and 0.01: ln-fraction ln(5)/ln(50)
        let x = disappearance_point(&xs, &v, 0.1).unwrap();
        assert!((x - (1.0 + 5f64.ln() / 50f64.ln())).abs() < 1e-12);
        assert_eq!(disappearance_point(&xs, &[1.0, 0.9, 0.8, 0.7], 0.1), None);
    }

    #[test]
    fn field_spectrum_of_lossless_aligned_state_is_one_tone() {
        // homogeneous, Δφ = 0, W = 0: Δ rotates rigidly, a single line at |a|
        let p = CavityParams {
            gamma: 0.0,
            ..homogeneous()
        };
        let spec = CavityRunSpec {
            angle: 0.0,
            eps0_over_chi_n: 0.0,
            w_over_chi_n: 0.0,
            splitting: SplittingKind::EquallySpaced,
        };
        let evo = EvolutionConfig {
            t_max: 200.0,
            n_samples: 2048,
            ..Default::default()
        };
        let run = run_cavity_experiment(&spec, &p, &evo).unwrap();
        let s = field_spectrum(
            &run,
            &p,
            Window::LAST_HALF,
            &SpectrumOptions {
                subtract_mean: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(count_peaks(&s, 0.1), 1);
        assert!((s.peaks[0].amplitude - 1.0).abs() < 0.02, "{:?}", s.peaks[0]);
    }
}
