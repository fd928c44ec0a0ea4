//! End-to-end checks of the `bcsq` binary: exit codes, flag/config
//! precedence, trajectory files and sweeps.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bcs_quench::dynamics::TrajectoryTable;
use serde_json::Value;

fn bcsq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcsq"))
        .args(args)
        .env_remove("BCSQ_WORKERS")
        .output()
        .expect("bcsq runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn exit_codes() {
    assert_eq!(code(&bcsq(&["--help"])), 0);
    assert_eq!(code(&bcsq(&[])), 1);
    assert_eq!(code(&bcsq(&["evolve", "--no-such-flag"])), 1);
    assert_eq!(code(&bcsq(&["evolve", "--n", "10", "--rel-tol", "0"])), 1);
    // tolerances this tight drive the step size to underflow
    let out = bcsq(&["evolve", "--n", "10", "--t-max", "10", "--rel-tol", "1e-300"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("underflow"));
    assert_eq!(code(&bcsq(&["selftest"])), 0);
}

#[test]
fn unknown_config_key_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lax.json");
    fs::write(&cfg, r#"{"point": {"angle": 1.0, "oops": 2}}"#).unwrap();
    let out = bcsq(&["lax", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("point.oops"));
}

#[test]
fn flags_override_config_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lax.json");
    fs::write(&cfg, r#"{"point": {"angle": 3.141592653589793, "w_over_chi_n": 0.5}}"#).unwrap();
    let c = cfg.to_str().unwrap();

    let from_config = json(&bcsq(&["lax", "--config", c]));
    assert_eq!(from_config["w_over_chi_n"], 0.5);
    assert_eq!(from_config["eps0_over_chi_n"], 0.1);
    assert_eq!(from_config["phase"], "IIIb");

    // beyond W = πχN the antipodal state has no isolated roots
    let flagged = json(&bcsq(&["lax", "--config", c, "--w-over-chiN", "4"]));
    assert_eq!(flagged["w_over_chi_n"], 4.0);
    assert_eq!(flagged["angle"], std::f64::consts::PI);
    assert_eq!(flagged["phase"], "I");
}

#[test]
fn trajectory_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["t.csv", "t.json"] {
        let path = dir.path().join(name);
        let p = path.to_str().unwrap();
        let out = bcsq(&["evolve", "--n", "20", "--t-max", "5", "--samples", "51", "-o", p]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let summary = json(&out);
        let table = TrajectoryTable::load(&path).unwrap();
        assert_eq!(table.len(), 51);
        assert_eq!(table.t[50], 5.0);
        assert_eq!(
            *table.abs_delta.last().unwrap(),
            summary["abs_delta_final"].as_f64().unwrap()
        );
    }
    let a = TrajectoryTable::load(&dir.path().join("t.csv")).unwrap();
    let b = TrajectoryTable::load(&dir.path().join("t.json")).unwrap();
    assert_eq!(a, b);

    let spec = bcsq(&[
        "spectrum",
        dir.path().join("t.csv").to_str().unwrap(),
        "--signal",
        "abs-delta",
        "--start",
        "0",
    ]);
    assert_eq!(code(&spec), 0, "{}", String::from_utf8_lossy(&spec.stderr));
    assert!(json(&spec)["peaks"].is_array());
}

fn write_spec(dir: &Path, output: &Path) -> std::path::PathBuf {
    let spec = dir.join("sweep.json");
    fs::write(
        &spec,
        format!(
            r#"{{"schema_version": 1, "engine": "lax", "fixed": {{"eps0_over_chi_n": 0.1}},
                "axes": [{{"param": "angle", "start": 0, "end": 3.14, "points": 6}},
                         {{"param": "w_over_chi_n", "start": 0.05, "end": 5, "points": 7, "spacing": "log"}}],
                "output": {:?}}}"#,
            output.to_str().unwrap()
        ),
    )
    .unwrap();
    spec
}

#[test]
fn sweep_output_is_independent_of_workers_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    let spec = write_spec(dir.path(), &out);
    let s = spec.to_str().unwrap();

    let one = bcsq(&["phase-diagram", "--config", s, "--workers", "1"]);
    assert_eq!(code(&one), 0, "{}", String::from_utf8_lossy(&one.stderr));
    let serial = fs::read(&out).unwrap();
    let two = bcsq(&["phase-diagram", "--config", s, "--workers", "3"]);
    assert_eq!(code(&two), 0);
    assert_eq!(fs::read(&out).unwrap(), serial);

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("grid.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["workers"], 3);
    assert_eq!(manifest["cells"], 42);

    let resumed = bcsq(&["phase-diagram", "--config", s, "--resume"]);
    assert_eq!(code(&resumed), 0);
    assert_eq!(fs::read(&out).unwrap(), serial);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("grid.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["resumed_cells"], 42);
}
