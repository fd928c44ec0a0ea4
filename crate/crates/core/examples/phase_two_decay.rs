//! Phase II: aligned ensembles spread over `W`, `ε₀ = 0`. The oscillation
//! envelope of `|Δ(t)|` decays as a power law; its exponent is fitted on the
//! extrema of the trajectory.
//!
//! ```text
//! cargo run --release --example phase_two_decay
//! ```

use bcs_quench::dynamics::{integrate, EvolutionConfig};
use bcs_quench::model::{prepare_initial_state, sample_splittings, InitialStateSpec, ModelParams, SplittingKind};
use bcs_quench::observables::decay_exponent;

fn main() -> bcs_quench::Result<()> {
    let params = ModelParams::from_ratios(1000, 0.0, 1.0)?;
    let eps = sample_splittings(&params.splitting_spec(SplittingKind::EquallySpaced));
    let state = prepare_initial_state(&InitialStateSpec::Azimuthal { angle: 0.0 }, &eps)?;
    let traj = integrate(
        &state,
        &params,
        &EvolutionConfig {
            t_max: 400.0,
            n_samples: 8192,
            ..Default::default()
        },
    )?;
    let abs = traj.abs_delta();
    for t in [10.0, 50.0, 100.0, 200.0, 400.0] {
        let k = traj.times.iter().position(|&s| s >= t - 1e-9).unwrap_or(abs.len() - 1);
        println!("t = {t:5.0}: |Delta| = {:.5}", abs[k]);
    }
    match decay_exponent(&traj.times, &abs, 50.0, 400.0) {
        Some(p) => println!("envelope ~ t^{p:.3} over t in [50, 400]"),
        None => println!("too few extrema to fit"),
    }
    Ok(())
}
