//! Runtime identity and conservation checks, shared by `bcsq selftest` and
//! the test suite.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::{integrate, EvolutionConfig};
use crate::error::Result;
use crate::lax::discrete_lax_squared;
use crate::model::{prepare_initial_state, sample_splittings, InitialStateSpec, ModelParams, SpinState, SplittingKind};
use crate::observables::{spectrum_complex, SpectrumOptions};
use crate::special::{complex_atanh, elliptic_k, jacobi_sn};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed error and its tolerance.
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: impl Into<String>, error: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            passed: error <= tolerance,
            error,
            tolerance,
        }
    }

    fn failed(name: impl Into<String>, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            passed: false,
            error: f64::INFINITY,
            tolerance,
        }
    }
}

fn worst(errors: impl IntoIterator<Item = Result<f64>>) -> f64 {
    errors
        .into_iter()
        .map(|e| e.unwrap_or(f64::INFINITY))
        .fold(0.0, |a, e| if e.is_nan() { f64::INFINITY } else { a.max(e) })
}

/// `K(0)`, reference values of `K`, the degenerate limits of `sn`, the
/// quarter period and period of `sn`, `atanh` identities and Parseval.
pub fn special_function_checks() -> Vec<Check> {
    let mut out = vec![
        Check::new(
            "K(0) = pi/2",
            worst([elliptic_k(0.0).map(|k| (k - FRAC_PI_2).abs())]),
            1e-15,
        ),
        Check::new(
            "K(0.5), K(-1) reference values",
            worst([
                elliptic_k(0.5).map(|k| (k / 1.854_074_677_301_372 - 1.0).abs()),
                elliptic_k(-1.0).map(|k| (k / 1.311_028_777_146_06 - 1.0).abs()),
            ]),
            1e-12,
        ),
        Check::new(
            "sn(u, 0) = sin u",
            worst([0.3, 1.1, 2.9].map(|u| jacobi_sn(u, 0.0).map(|s| (s - f64::sin(u)).abs()))),
            1e-12,
        ),
        Check::new(
            "sn(u, 1) = tanh u",
            worst([0.3, 1.1, 2.9].map(|u| jacobi_sn(u, 1.0).map(|s| (s - f64::tanh(u)).abs()))),
            1e-12,
        ),
        Check::new(
            "sn(K(m), m) = 1",
            worst(
                [-2.0, -0.5, 0.25, 0.9].map(|m| elliptic_k(m).and_then(|k| jacobi_sn(k, m)).map(|s| (s - 1.0).abs())),
            ),
            1e-12,
        ),
        Check::new(
            "sn(u + 4K, m) = sn(u, m)",
            worst([(-3.0, 0.4), (-0.5, 1.7), (0.3, 0.2), (0.95, 2.5)].map(|(m, u)| {
                let k = elliptic_k(m)?;
                Ok((jacobi_sn(u + 4.0 * k, m)? - jacobi_sn(u, m)?).abs())
            })),
            1e-10,
        ),
        Check::new(
            "atanh(0.5), atanh(2i)",
            worst([
                complex_atanh(Complex64::new(0.5, 0.0))
                    .map(|z| (z - Complex64::new(0.549_306_144_334_054_9, 0.0)).norm()),
                complex_atanh(Complex64::new(0.0, 2.0)).map(|z| (z - Complex64::new(0.0, f64::atan(2.0))).norm()),
            ]),
            1e-12,
        ),
    ];
    out.push(parseval_check());
    out
}

/// Windowed Parseval: `Σ|X_k|² = n Σ|w x|²` for a two-tone complex series.
fn parseval_check() -> Check {
    let n = 1000;
    let dt = 0.05;
    let x: Vec<Complex64> = (0..n)
        .map(|k| {
            let t = k as f64 * dt;
            Complex64::from_polar(1.0, 1.3 * t) + Complex64::from_polar(0.4, -2.9 * t + 0.7)
        })
        .collect();
    let opts = SpectrumOptions {
        subtract_mean: false,
        ..Default::default()
    };
    let Ok(s) = spectrum_complex(&x, dt, &opts) else {
        return Check::failed("Parseval", 1e-12);
    };
    let w = |k: usize| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos();
    let time: f64 = x.iter().enumerate().map(|(k, z)| (w(k) * z).norm_sqr()).sum();
    let freq: f64 = s.magnitudes.iter().map(|m| m * m).sum::<f64>() / n as f64;
    Check::new("Parseval", (freq / time - 1.0).abs(), 1e-12)
}

/// Closed dynamics at `2N = 200`, `Δφ₀ = 2`, `ε₀/(χN) = 0.3`, `W/(χN) = 0.5`
/// over `t = 100/(χN)`: energy, spin norms and `Q(u)` at five real probes.
pub fn conservation_checks() -> Vec<Check> {
    let run = || -> Result<(Vec<f64>, f64, f64)> {
        let params = ModelParams::from_ratios(100, 0.3, 0.5)?;
        let eps = sample_splittings(&params.splitting_spec(SplittingKind::EquallySpaced));
        let state = prepare_initial_state(&InitialStateSpec::Azimuthal { angle: 2.0 }, &eps)?;
        let config = EvolutionConfig {
            t_max: 100.0,
            n_samples: 101,
            snapshot_every: 10,
            ..Default::default()
        };
        let traj = integrate(&state, &params, &config)?;
        let e0 = traj.energy[0];
        let energy = traj.energy.iter().map(|e| ((e - e0) / e0).abs()).fold(0.0, f64::max);
        let norms = traj.max_norm_deviation.iter().cloned().fold(0.0, f64::max);
        // probes between and beyond the two bands, away from every εⱼ
        let probes = [-0.9, -0.4, 0.0, 0.4, 1.3].map(|u| Complex64::new(u, 0.0));
        let q0: Vec<Complex64> = probes
            .iter()
            .map(|&u| discrete_lax_squared(u, &state, params.chi))
            .collect();
        let mut lax = Vec::new();
        for (_, sigma) in &traj.snapshots {
            let s = SpinState::new(sigma.clone(), eps.clone())?;
            for (u, q) in probes.iter().zip(&q0) {
                lax.push(((discrete_lax_squared(*u, &s, params.chi) - q) / q).norm());
            }
        }
        if lax.len() < 5 * probes.len() {
            return Err(crate::Error::InvalidInput("too few snapshots".into()));
        }
        Ok((lax, energy, norms))
    };
    match run() {
        Ok((lax, energy, norms)) => vec![
            Check::new("energy conserved", energy, 1e-6),
            Check::new("spin norms conserved", norms, 1e-6),
            Check::new("Q(u) conserved at 5 probes", lax.into_iter().fold(0.0, f64::max), 1e-6),
        ],
        Err(_) => vec![
            Check::failed("energy conserved", 1e-6),
            Check::failed("spin norms conserved", 1e-6),
            Check::failed("Q(u) conserved at 5 probes", 1e-6),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        for c in special_function_checks().into_iter().chain(conservation_checks()) {
            assert!(c.passed, "{c:?}");
        }
    }
}
