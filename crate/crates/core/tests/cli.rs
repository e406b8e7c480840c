use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn obstakl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_obstakl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const VARIABLE_P: &str = r#"{
  "problem": {
    "kind": "custom",
    "operator": {
      "p": { "mode": "affine", "p0": 1.5, "gradient": [1.5, 0.0], "p_minus": 1.5, "p_plus": 3.0 },
      "M": { "mode": "constant", "value": 1.0 }
    },
    "f": { "mode": "constant", "value": 1.0 },
    "g": { "mode": "constant", "value": 0.01 }
  },
  "grid": { "n": 32 },
  "analyses": ANALYSES
}"#;

#[test]
fn missing_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{ "problem": { "kind": "oracle_1d", "p": 2.0, "lam": 1.0, "g0": 0.02, "g1": 0.02 } }"#,
    );
    let out = obstakl(&["solve", &cfg, "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("grid: required"), "{}", stderr(&out));
}

#[test]
fn unknown_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{ "problem": { "kind": "half_plane" }, "grid": { "n": 16 }, "solver": {} }"#,
    );
    let out = obstakl(&["solve", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("solver"), "{}", stderr(&out));
}

#[test]
fn zero_data_solves_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
  "problem": {
    "kind": "custom",
    "operator": { "p": { "mode": "constant", "value": 2.5 }, "M": { "mode": "constant", "value": 1.0 } },
    "f": { "mode": "constant", "value": 0.0 },
    "g": { "mode": "constant", "value": 0.0 }
  },
  "grid": { "n": 16 }
}"#,
    );
    let out_dir = dir.path().join("out");
    let out = obstakl(&["solve", &cfg, "--output-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let u = obstakl::fields::read_field_csv(out_dir.join("u.csv")).unwrap();
    assert_eq!(u.sup_norm(), 0.0);
}

#[test]
fn oracle_1d_diagnostics_residual_below_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = obstakl(&["solve", "oracle-1d", "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let d = read_json(&dir.path().join("diagnostics.json"));
    let res = d["diagnostics"]["final_residual"].as_f64().unwrap();
    let tol = d["config"]["solve"]["tol_residual"].as_f64().unwrap();
    assert!(res <= tol, "{res} > {tol}");
    assert!(d["u_error_inf"].as_f64().unwrap() < 1e-4);
}

#[test]
fn growth_on_oracle_1d_fits_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
  "problem": { "kind": "oracle_1d", "p": 2.0, "lam": 1.0, "g0": 0.02, "g1": 0.02 },
  "grid": { "n": 512 },
  "analyses": [ { "kind": "growth", "r_min_cells": 16, "r_max": 0.19 } ]
}"#,
    );
    let out = obstakl(&["analyze", &cfg, "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = read_json(&dir.path().join("report.json"));
    let fits = r["free_boundary"]["growth_fits"].as_array().unwrap();
    assert!(!fits.is_empty());
    for fit in fits {
        let a = fit["exponent"].as_f64().unwrap();
        assert!((a - 2.0).abs() <= 0.1, "exponent {a}");
    }
    assert!(dir.path().join("growth.csv").is_file());
}

#[test]
fn o_delta_with_variable_p_fails_alone() {
    let dir = tempfile::tempdir().unwrap();
    let json = VARIABLE_P.replace(
        "ANALYSES",
        r#"[ { "kind": "o_delta", "point": [0.5, 0.0], "r": 0.15 }, { "kind": "porosity", "radii": [0.1, 0.2] } ]"#,
    );
    let cfg = write_config(dir.path(), &json);
    let out = obstakl(&["analyze", &cfg, "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = read_json(&dir.path().join("report.json"));
    let errors = r["errors"].as_array().unwrap();
    assert_eq!(errors.len(), 1);
    assert_eq!(errors[0]["analysis"], "o_delta");
    assert!(errors[0]["message"].as_str().unwrap().contains("requires constant exponent"));
    assert!(r["free_boundary"]["porosity"]["delta_hat"].as_f64().unwrap() > 0.0);
}

#[test]
fn every_analysis_failing_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let json = VARIABLE_P.replace("ANALYSES", r#"[ { "kind": "o_delta", "point": [0.5, 0.0], "r": 0.15 } ]"#);
    let cfg = write_config(dir.path(), &json);
    let out = obstakl(&["analyze", &cfg, "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("report.json").is_file());
}

#[test]
fn half_plane_fixture_bv_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{ "problem": { "kind": "half_plane" }, "grid": { "n": 32 }, "analyses": [ { "kind": "bv" } ] }"#,
    );
    let out = obstakl(&["analyze", &cfg, "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = read_json(&dir.path().join("report.json"));
    assert_eq!(r["free_boundary"]["perimeter"]["bv_norm"].as_f64(), Some(1.0));
}

#[test]
fn sweep_needs_two_levels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{ "problem": { "kind": "half_plane" }, "grid": { "n": 16 }, "refinement_levels": 1 }"#,
    );
    let out = obstakl(&["sweep", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("refinement_levels must be ≥ 2"));
}

#[test]
fn oracle_1d_sweep_converges() {
    let dir = tempfile::tempdir().unwrap();
    let out = obstakl(&["sweep", "oracle-1d", "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("level,h,quantity,value,observed_order"));
    let (mut lh, mut le) = (Vec::new(), Vec::new());
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[2] == "u_error_inf" {
            lh.push(cols[1].parse::<f64>().unwrap().ln());
            le.push(cols[3].parse::<f64>().unwrap().ln());
        }
    }
    assert_eq!(lh.len(), 4);
    let (order, _) = obstakl::freeboundary::fit_line(&lh, &le);
    assert!(order >= 0.85, "order {order}");
    for k in 0..4 {
        assert!(dir.path().join(format!("level_{k}/report.json")).is_file());
    }
}

#[test]
fn analyze_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let mut reports = Vec::new();
    for _ in 0..2 {
        let out = obstakl(&["analyze", "oracle-radial", "--output-dir", out_dir]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        reports.push(std::fs::read_to_string(dir.path().join("report.json")).unwrap());
    }
    assert!(reports[0] == reports[1], "report.json differs between runs");
}

#[test]
fn presets_list_names_the_oracles() {
    let out = obstakl(&["presets", "list"]);
    assert_eq!(out.status.code(), Some(0));
    let s = String::from_utf8(out.stdout).unwrap();
    for name in ["oracle-1d", "oracle-radial", "variable-p-demo"] {
        assert!(s.contains(name));
    }
}

#[test]
fn unknown_config_exits_1() {
    let out = obstakl(&["solve", "no-such-preset"]);
    assert_eq!(out.status.code(), Some(1));
}
