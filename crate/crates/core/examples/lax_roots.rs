//! Roots of `Q(u) = L(u)·L(u)` for antipodal ensembles: numerical search with
//! continuation in `W` against the closed form, and the resulting phases.
//!
//! ```text
//! cargo run --release --example lax_roots
//! ```

use std::f64::consts::PI;

use bcs_quench::lax::{
    analytic_roots_antipodal, find_roots_continuation, Family, LaxProblem, RootSearchOptions, SUBPHASE_TOL,
};

fn main() {
    let eps0 = 0.1;
    let ws: Vec<f64> = (1..=16).map(|k| 0.2 * k as f64).collect();
    let base = LaxProblem::new(1.0, eps0, ws[0], Family::Azimuthal, PI);
    let points = find_roots_continuation(&base, &ws, &RootSearchOptions::default());

    println!("eps0/(chiN) = {eps0}, dphi = pi");
    println!(
        "{:>5} {:>6} {:>26} {:>26} {:>9}",
        "W", "phase", "numeric root", "closed form", "R-/R+"
    );
    for p in &points {
        let Some(found) = p.outcome.roots() else {
            println!("{:5.2} undetermined", p.w);
            continue;
        };
        let exact = analytic_roots_antipodal(1.0, eps0, p.w);
        let show =
            |r: Option<&num_complex::Complex64>| r.map_or("-".to_string(), |z| format!("{:+.6}{:+.6}i", z.re, z.im));
        println!(
            "{:5.2} {:>6} {:>26} {:>26} {:>9}",
            p.w,
            p.outcome.phase(SUBPHASE_TOL).map_or("?", |ph| ph.as_str()),
            show(found.roots.first()),
            show(exact.roots.first()),
            found.r_minus_over_r_plus().map_or("-".into(), |r| format!("{r:.1e}")),
        );
    }
    println!("complex roots close at W = pi: {:.4}", PI);
}
