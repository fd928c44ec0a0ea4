//! Quench two antipodal ensembles and compare `|Δ(t)|` with the elliptic
//! solution built from the Lax roots.
//!
//! ```text
//! cargo run --release --example quench_trajectory -- [W/(χN)]
//! ```

use std::f64::consts::PI;

use bcs_quench::dynamics::{integrate, EvolutionConfig};
use bcs_quench::lax::{analytic_roots_antipodal, EllipticSolution, SUBPHASE_TOL};
use bcs_quench::model::{prepare_initial_state, sample_splittings, InitialStateSpec, ModelParams, SplittingKind};
use bcs_quench::observables::{amplitude, classify_trajectory, extract_omega_osc, TrajectoryThresholds, Window};

fn main() -> bcs_quench::Result<()> {
    let w: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let eps0 = 0.1;

    let params = ModelParams::from_ratios(1000, eps0, w)?;
    let eps = sample_splittings(&params.splitting_spec(SplittingKind::EquallySpaced));
    let state = prepare_initial_state(&InitialStateSpec::Azimuthal { angle: PI }, &eps)?;
    let config = EvolutionConfig {
        t_max: 200.0,
        n_samples: 4001,
        ..Default::default()
    };
    let traj = integrate(&state, &params, &config)?;
    let abs = traj.abs_delta();

    let label = classify_trajectory(&traj, params.chi_n(), Some(PI), &TrajectoryThresholds::default())?;
    println!(
        "2N = {}, eps0 = {eps0}, W = {w}, dphi = pi: phase {}",
        2 * 1000,
        label.phase
    );
    println!(
        "energy drift {:.2e} (chiN units), amplitude {:.4}",
        traj.energy
            .iter()
            .map(|e| (e - traj.energy[0]).abs())
            .fold(0.0, f64::max),
        amplitude(&abs, Window::LAST_HALF)?
    );
    if let Some(omega) = extract_omega_osc(&abs, traj.sample_dt(), Window::LAST_HALF)? {
        println!("omega_osc {omega:.4}");
    }

    let roots = analytic_roots_antipodal(1.0, eps0, w);
    match EllipticSolution::from_roots(&roots, SUBPHASE_TOL) {
        Ok(sol) => {
            println!(
                "elliptic: amplitude {:.4}, omega_osc {:.4}",
                sol.amplitude(),
                sol.omega_osc()
            );
            println!("{:>8} {:>10} {:>10}", "t", "|Delta|", "sqrt(R+)|sn|");
            for k in (0..=40).map(|k| 3900 + 2 * k) {
                println!("{:8.2} {:10.5} {:10.5}", traj.times[k], abs[k], sol.eval(traj.times[k]));
            }
        }
        Err(e) => println!("no elliptic solution: {e}"),
    }
    Ok(())
}
