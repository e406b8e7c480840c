use std::ffi::{CStr, CString};
use std::ptr;

use obstakl_ffi::*;

fn last_error() -> String {
    let p = obstakl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn oracle_preset_round_trip() {
    unsafe {
        let name = CString::new("oracle-1d").unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(obstakl_config_from_preset(name.as_ptr(), &mut cfg), ObstaklStatus::Ok);
        let mut sol = ptr::null_mut();
        assert_eq!(obstakl_solve(cfg, 0, &mut sol), ObstaklStatus::Ok);

        let (mut nodes, mut h, mut dim) = (0usize, 0.0, 0usize);
        assert_eq!(obstakl_solution_shape(sol, &mut nodes, &mut h, &mut dim), ObstaklStatus::Ok);
        assert_eq!((nodes, dim), (65, 1));
        assert_eq!(h, 1.0 / 64.0);

        let mut small = vec![0.0; 3];
        assert_eq!(
            obstakl_solution_values(sol, small.as_mut_ptr(), small.len()),
            ObstaklStatus::BufferTooSmall
        );
        let mut u = vec![f64::NAN; nodes];
        assert_eq!(obstakl_solution_values(sol, u.as_mut_ptr(), u.len()), ObstaklStatus::Ok);
        assert!(u.iter().all(|v| *v >= 0.0));
        assert_eq!(u[32], 0.0);

        let (mut res, mut err) = (f64::NAN, f64::NAN);
        assert_eq!(obstakl_solution_errors(sol, &mut res, &mut err), ObstaklStatus::Ok);
        assert!(res < 1e-8);
        assert!(err < 1e-4);

        let mut json = ptr::null_mut();
        assert_eq!(obstakl_analyze(cfg, sol, &mut json), ObstaklStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap();
        assert!(text.contains("\"growth_fits\""));
        obstakl_string_free(json);

        obstakl_solution_free(sol);
        obstakl_config_free(cfg);
    }
}

#[test]
fn config_errors_are_reported() {
    unsafe {
        let bad = CString::new(r#"{ "problem": { "kind": "half_plane" } }"#).unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(obstakl_config_from_json(bad.as_ptr(), &mut cfg), ObstaklStatus::Config);
        assert!(cfg.is_null());
        assert!(last_error().contains("grid: required"));

        let missing = CString::new("no-such-preset").unwrap();
        assert_eq!(obstakl_config_from_preset(missing.as_ptr(), &mut cfg), ObstaklStatus::Config);
    }
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(obstakl_config_from_json(ptr::null(), &mut cfg), ObstaklStatus::NullPointer);
        let mut sol = ptr::null_mut();
        assert_eq!(obstakl_solve(ptr::null(), 0, &mut sol), ObstaklStatus::NullPointer);
        obstakl_config_free(ptr::null_mut());
        obstakl_solution_free(ptr::null_mut());
        obstakl_string_free(ptr::null_mut());
    }
}

#[test]
fn all_analyses_failing_still_returns_report() {
    unsafe {
        let json = CString::new(
            r#"{
  "problem": {
    "kind": "custom",
    "operator": {
      "p": { "mode": "affine", "p0": 1.5, "gradient": [1.5, 0.0], "p_minus": 1.5, "p_plus": 3.0 },
      "M": { "mode": "constant", "value": 1.0 }
    },
    "f": { "mode": "constant", "value": 1.0 },
    "g": { "mode": "constant", "value": 0.01 }
  },
  "grid": { "n": 16 },
  "analyses": [ { "kind": "o_delta", "point": [0.5, 0.0], "r": 0.2 } ]
}"#,
        )
        .unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(obstakl_config_from_json(json.as_ptr(), &mut cfg), ObstaklStatus::Ok);
        let mut sol = ptr::null_mut();
        assert_eq!(obstakl_solve(cfg, 0, &mut sol), ObstaklStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(obstakl_analyze(cfg, sol, &mut out), ObstaklStatus::Analysis);
        assert!(!out.is_null());
        assert!(last_error().contains("requires constant exponent"));
        obstakl_string_free(out);
        obstakl_solution_free(sol);
        obstakl_config_free(cfg);
    }
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/obstakl.h")).unwrap();
    for name in [
        "typedef struct ObstaklConfig ObstaklConfig",
        "typedef struct ObstaklSolution ObstaklSolution",
        "OBSTAKL_STATUS_OK = 0",
        "obstakl_config_from_json",
        "obstakl_solve",
        "obstakl_analyze",
        "obstakl_last_error",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(obstakl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
