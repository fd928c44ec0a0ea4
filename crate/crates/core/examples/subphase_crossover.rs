//! Crossing from IIIa to IIIb at small `W`: `R₋/R₊` from the Lax roots and
//! `min|Δ|/max|Δ|` from single-spin trajectories, against
//! `ε₀ᶜ = (χN/2)(1 + cos Δφ₀)`.
//!
//! ```text
//! cargo run --release --example subphase_crossover -- [Δφ₀]
//! ```

use std::f64::consts::FRAC_PI_2;

use bcs_quench::dynamics::{integrate, EvolutionConfig};
use bcs_quench::lax::{analytic_roots_small_w, classify_from_roots, critical_splitting, Family, SUBPHASE_TOL};
use bcs_quench::model::{prepare_initial_state, sample_splittings, InitialStateSpec, ModelParams, SplittingKind};
use bcs_quench::observables::min_abs_interpolated;

fn main() -> bcs_quench::Result<()> {
    let angle: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(FRAC_PI_2);
    let ec = critical_splitting(1.0, angle);
    println!("dphi = {angle:.4}: eps0c/(chiN) = {ec:.4}");
    println!(
        "{:>10} {:>6} {:>10} {:>14}",
        "eps0/chiN", "phase", "R-/R+", "min/max |D|"
    );
    for k in 0..=12 {
        let eps0 = ec * (0.7 + 0.05 * k as f64);
        let roots = analytic_roots_small_w(1.0, eps0, Family::Azimuthal, angle)?;
        let params = ModelParams::from_ratios(1, eps0, 0.0)?;
        let eps = sample_splittings(&params.splitting_spec(SplittingKind::EquallySpaced));
        let state = prepare_initial_state(&InitialStateSpec::Azimuthal { angle }, &eps)?;
        let traj = integrate(
            &state,
            &params,
            &EvolutionConfig {
                t_max: 400.0,
                n_samples: 40_001,
                ..Default::default()
            },
        )?;
        let max = traj.abs_delta().into_iter().fold(0.0, f64::max);
        println!(
            "{eps0:10.4} {:>6} {:10.2e} {:14.4}",
            classify_from_roots(&roots, SUBPHASE_TOL).as_str(),
            roots.r_minus_over_r_plus().unwrap_or(f64::NAN),
            min_abs_interpolated(&traj.delta) / max
        );
    }
    Ok(())
}
