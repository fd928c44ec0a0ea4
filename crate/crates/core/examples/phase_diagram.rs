//! Dynamical phase map over the opening angle and the inhomogeneous width,
//! labelled by counting isolated Lax root pairs, printed as a character grid.
//!
//! ```text
//! cargo run --release --example phase_diagram -- [eps0/(χN)]
//! ```

use bcs_quench::sweep::{evaluate, SweepSpec};

fn main() -> bcs_quench::Result<()> {
    let eps0: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let spec = SweepSpec::from_json(&format!(
        r#"{{
            "engine": "lax",
            "fixed": {{"eps0_over_chi_n": {eps0}}},
            "axes": [
                {{"param": "angle", "start": 0, "end": 3.141592653589793, "points": 25}},
                {{"param": "w_over_chi_n", "start": 0.02, "end": 8, "points": 60, "spacing": "log"}}
            ]
        }}"#
    ))?;
    let grid = evaluate(&spec, spec.resolved_workers())?;
    let ws = spec.axes[1].values();

    println!("eps0/(chiN) = {eps0}; rows: dphi from pi (top) to 0, columns: W/(chiN) log-spaced 0.02..8");
    println!("legend: 3 = III, 2 = II, . = I, ? = undetermined");
    for i in (0..25).rev() {
        let row: String = (0..60)
            .map(|j| match grid.get(i, j).phase.as_str() {
                "IIIa" | "IIIb" => '3',
                "II" => '2',
                "I" => '.',
                _ => '?',
            })
            .collect();
        println!("{:5.2} |{row}|", grid.get(i, 0).angle);
    }
    let tick = |j: usize| format!("{:.2}", ws[j]);
    println!("       {:<20}{:<20}{:>20}", tick(0), tick(20), tick(59));
    Ok(())
}
