//! End-to-end tests of the lsgrad-dtn binary: exit codes, file layout, and
//! agreement with the library on the same inputs.

use std::path::Path;
use std::process::Command;

use lsgrad_core::grid::{build_square_grid, BoundaryData};
use lsgrad_core::io;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lsgrad-dtn"))
}

fn write_boundary(grid_n: usize, dir: &Path, name: &str, f: impl Fn(f64, f64) -> f64) {
    let grid = build_square_grid(grid_n, 1.0).unwrap();
    let b = BoundaryData::from_fn(&grid, f);
    io::save_field_csv(&dir.join(name), &b.values).unwrap();
}

#[test]
fn grid_solve_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let status = bin()
        .args(["grid", "--shape", "square", "--n", "8", "--size", "1"])
        .args(["--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("grid.json").exists());

    write_boundary(8, out, "h.csv", |x, _| if x > 0.5 { 1.0 } else { -1.0 });
    let status = bin()
        .args(["solve", "--grid"])
        .arg(out.join("grid.json"))
        .arg("--h")
        .arg(out.join("h.csv"))
        .args(["--out", out.to_str().unwrap(), "--tol", "1e-8"])
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["u.csv", "z.csv", "g.csv", "report.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], serde_json::Value::Bool(true));
    // sign data on the unit square: cut of length 1, jump 2
    let energy = report["primal_energy"].as_f64().unwrap();
    assert!((energy - 2.0).abs() < 0.05, "{energy}");
}

#[test]
fn dtn_eval_reports_selection() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    bin()
        .args(["grid", "--shape", "disk", "--n", "16"])
        .args(["--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    let grid = io::load_grid(&out.join("grid.json")).unwrap();
    let h = BoundaryData::from_fn(&grid, |x, y| x + 0.3 * y);
    io::save_field_csv(&out.join("h.csv"), &h.values).unwrap();
    let status = bin()
        .args(["dtn", "eval", "--grid"])
        .arg(out.join("grid.json"))
        .arg("--h")
        .arg(out.join("h.csv"))
        .args(["--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let g = io::load_field_csv(&out.join("g.csv")).unwrap();
    assert!(g.iter().all(|v| v.abs() <= 1.0 + 1e-9));
}

#[test]
fn resolvent_moves_at_most_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    bin()
        .args(["grid", "--shape", "square", "--n", "6"])
        .args(["--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    write_boundary(6, out, "g.csv", |x, y| (7.0 * x).sin() + y);
    let status = bin()
        .args(["resolvent", "--grid"])
        .arg(out.join("grid.json"))
        .arg("--g")
        .arg(out.join("g.csv"))
        .args(["--lambda", "0.25", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let h = io::load_field_csv(&out.join("h.csv")).unwrap();
    let g = io::load_field_csv(&out.join("g.csv")).unwrap();
    for (a, b) in h.iter().zip(&g) {
        assert!((a - b).abs() <= 0.25 + 1e-8);
    }
}

#[test]
fn evolve_writes_states_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    bin()
        .args(["grid", "--shape", "square", "--n", "6"])
        .args(["--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    write_boundary(6, out, "h0.csv", |x, _| if x > 0.5 { 1.0 } else { 0.0 });
    let status = bin()
        .args(["evolve", "--grid"])
        .arg(out.join("grid.json"))
        .arg("--h0")
        .arg(out.join("h0.csv"))
        .args(["--tau", "0.1", "--t-end", "0.5", "--f", "zero"])
        .args(["--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["mass.csv", "phi.csv", "dhdt_l2.csv", "report.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert!(out.join("states").join("h_00000.csv").exists());
    assert!(out.join("states").join("h_00005.csv").exists());
}

#[test]
fn oracle_value_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    bin()
        .args(["grid", "--shape", "square", "--n", "8"])
        .args(["--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    write_boundary(8, out, "h.csv", |x, _| if x > 0.5 { 1.0 } else { -1.0 });
    let output = bin()
        .args(["oracle", "--grid"])
        .arg(out.join("grid.json"))
        .arg("--h")
        .arg(out.join("h.csv"))
        .args(["--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(output.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!((report["value"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!(out.join("u_star.csv").exists());
}

#[test]
fn plap_single_and_continue() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    bin()
        .args(["grid", "--shape", "square", "--n", "8"])
        .args(["--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    write_boundary(8, out, "g.csv", |x, y| x - y);
    let status = bin()
        .args(["plap", "--p", "1.2", "--grid"])
        .arg(out.join("grid.json"))
        .arg("--g")
        .arg(out.join("g.csv"))
        .args(["--alpha", "1.0", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("u.csv").exists());

    let status = bin()
        .args(["plap", "continue", "--schedule", "1.8,1.4,1.2", "--grid"])
        .arg(out.join("grid.json"))
        .arg("--g")
        .arg(out.join("g.csv"))
        .args(["--alpha", "1.0", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let report = std::fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("distance_l1"));
}

#[test]
fn experiment_recipe_and_unknown_recipe() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("exp");
    let status = bin()
        .args(["experiment", "--recipe", "extinction_probe", "--n", "12"])
        .args(["--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("results.json").exists());
    assert!(out.join("config.toml").exists());
    assert!(out.join("hash.txt").exists());

    let output = bin()
        .args(["experiment", "--recipe", "who_knows"])
        .args(["--out", dir.path().join("x").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("who_knows"), "{stderr}");
}

#[test]
fn usage_errors_exit_one() {
    // missing required option
    let output = bin().args(["solve"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    // unknown subcommand
    let output = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    // help is not an error
    let output = bin().args(["--help"]).output().unwrap();
    assert_eq!(output.status.code(), Some(0));
}

#[test]
fn nonconvergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    bin()
        .args(["grid", "--shape", "square", "--n", "12"])
        .args(["--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    let grid = io::load_grid(&out.join("grid.json")).unwrap();
    let h = BoundaryData::from_fn(&grid, |x, y| (9.0 * x).sin() * (7.0 * y).cos());
    io::save_field_csv(&out.join("h.csv"), &h.values).unwrap();
    // an absurdly tight tolerance cannot be met
    let output = bin()
        .args(["solve", "--grid"])
        .arg(out.join("grid.json"))
        .arg("--h")
        .arg(out.join("h.csv"))
        .args(["--out", out.to_str().unwrap(), "--tol", "1e-15"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{}", String::from_utf8_lossy(&output.stdout));
}

#[test]
fn verify_single_criterion() {
    let output = bin().args(["verify", "--criterion", "1"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("criterion  1"), "{stdout}");
    assert!(stdout.contains("PASS"), "{stdout}");
    assert_eq!(output.status.code(), Some(0));
}
