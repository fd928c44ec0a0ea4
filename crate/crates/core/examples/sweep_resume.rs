//! File-backed sweep: writes a CSV and its manifest, then resumes from the
//! manifest without recomputing finished cells.
//!
//! ```text
//! cargo run --release --example sweep_resume -- [output.csv]
//! ```

use bcs_quench::sweep::{manifest_path, run_sweep, SweepSpec};

fn main() -> bcs_quench::Result<()> {
    let output = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("bcsq_sweep.csv").display().to_string());
    let spec = SweepSpec::from_json(&format!(
        r#"{{
            "schema_version": 1,
            "engine": "trajectory",
            "fixed": {{"eps0_over_chi_n": 0.1, "n_per_ensemble": 200}},
            "evolution": {{"t_max": 150, "n_samples": 2048}},
            "axes": [
                {{"param": "angle", "start": 0, "end": 3.141592653589793, "points": 4}},
                {{"param": "w_over_chi_n", "start": 0.05, "end": 5, "points": 4, "spacing": "log"}}
            ],
            "output": {output:?}
        }}"#
    ))?;
    let (_, first) = run_sweep(&spec, false)?;
    println!(
        "{} cells, {} undetermined, {:.1} s",
        first.cells, first.undetermined, first.wall_time_s
    );
    let (_, again) = run_sweep(&spec, true)?;
    println!(
        "resume: {} cells reused, {:.2} s",
        again.resumed_cells, again.wall_time_s
    );
    println!(
        "table {output}\nmanifest {}",
        manifest_path(std::path::Path::new(&output)).display()
    );
    print!("{}", std::fs::read_to_string(&output)?);
    Ok(())
}
