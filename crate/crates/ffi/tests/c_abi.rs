use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use hjb_transmission_ffi::*;

const MODEL: &str = r#"{
    "geometry": {"kind": "interval", "a": -1, "b": 1, "interface": 0, "h": 0.02},
    "operators": {"first_order": {"form": "eikonal"},
                  "second_order": {"form": "half_neg_laplacian", "rhs": 0}},
    "boundary": {"kind": "oracle1d", "alpha": -1}
}"#;

fn last_error() -> String {
    let p = hjb_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn solve_and_verify_round_trip() {
    let json = CString::new(MODEL).unwrap();
    let mut problem = ptr::null_mut();
    unsafe {
        assert_eq!(hjb_problem_from_json(json.as_ptr(), &mut problem), HjbStatus::Ok);
        let mut n = 0usize;
        assert_eq!(hjb_problem_node_count(problem, &mut n), HjbStatus::Ok);
        assert_eq!(n, 101);
        let mut sol = ptr::null_mut();
        assert_eq!(hjb_solve(problem, HjbRule::Strong, &mut sol), HjbStatus::Ok);
        let mut values = vec![0.0; n];
        assert_eq!(hjb_solution_values(sol, values.as_mut_ptr(), n - 1), HjbStatus::BufferTooSmall);
        assert!(last_error().contains("buffer"));
        assert_eq!(hjb_solution_values(sol, values.as_mut_ptr(), n), HjbStatus::Ok);
        for (k, v) in values.iter().enumerate() {
            let x = -1.0 + 0.02 * k as f64;
            assert!((v - (0.5 - (x + 0.5).abs())).abs() < 1e-8, "x={x}: {v}");
        }
        let diag = CStr::from_ptr(hjb_solution_diagnostics(sol)).to_str().unwrap();
        assert!(diag.contains("\"converged\":true"));
        let (mut pass, mut worst) = (false, -1.0);
        assert_eq!(hjb_verify(problem, sol, HjbRule::Strong, 0.0, &mut pass, &mut worst), HjbStatus::Ok);
        assert!(pass);
        assert_eq!(worst, 0.0);
        hjb_solution_free(sol);
        hjb_problem_free(problem);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut problem = ptr::null_mut();
        assert_eq!(hjb_problem_from_json(ptr::null(), &mut problem), HjbStatus::NullPointer);
        let bad = CString::new(r#"{"geometry": {"kind": "interval"}, "extra": 1}"#).unwrap();
        assert_eq!(hjb_problem_from_json(bad.as_ptr(), &mut problem), HjbStatus::Config);
        assert!(problem.is_null());
        let mut out = 0.0;
        assert_eq!(hjb_oracle1d_eval(-3.0, 0.0, &mut out), HjbStatus::Infeasible);
        assert_eq!(hjb_oracle1d_eval(-1.0, 2.0, &mut out), HjbStatus::Usage);
        assert_eq!(hjb_oracle1d_eval(-1.0, -0.5, &mut out), HjbStatus::Ok);
        assert_eq!(out, 0.5);
        assert!(hjb_last_error().is_null());
        let asym = [1.0, 2.0, 0.0, 1.0];
        assert_eq!(hjb_pucci(asym.as_ptr(), 2, 0.5, 1.0, true, &mut out), HjbStatus::Validation);
        hjb_problem_free(ptr::null_mut());
        hjb_solution_free(ptr::null_mut());
        assert!(hjb_solution_diagnostics(ptr::null()).is_null());
    }
}

#[test]
fn annulus_and_pucci() {
    unsafe {
        let mut a = HjbAnnulus::default();
        assert_eq!(hjb_annulus_solve(2, 0.5, 2.0, 1.0, &mut a), HjbStatus::Ok);
        assert!((a.a - 1.5).abs() < 1e-12);
        assert!((a.b + 1.375 / 2f64.ln()).abs() < 1e-12);
        assert_eq!(hjb_annulus_solve(2, 0.5, 2.0, f64::NAN, &mut a), HjbStatus::Ok);
        assert!((a.slope_at_rho - 1.0).abs() < 1e-6);
        let m = [2.0, 0.0, 0.0, -1.0];
        let mut v = 0.0;
        assert_eq!(hjb_pucci(m.as_ptr(), 2, 0.5, 1.0, true, &mut v), HjbStatus::Ok);
        // M⁺ = -(λ·Σ positive eigenvalues + Λ·Σ negative eigenvalues)
        assert!((v - (-(0.5 * 2.0) + 1.0)).abs() < 1e-12);
        assert_eq!(hjb_pucci(m.as_ptr(), 2, 0.5, 1.0, false, &mut v), HjbStatus::Ok);
        assert!((v - (-(1.0 * 2.0) + 0.5)).abs() < 1e-12);
    }
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let header_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = header_dir.join("hjb_transmission.h");
    assert!(header.exists(), "generated header missing");
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(cc.status.success());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include "hjb_transmission.h"
#include <stdio.h>
int main(void) {
    double u = 0.0;
    if (hjb_oracle1d_eval(-1.0, -0.5, &u) != HJB_STATUS_OK) return 1;
    if (u != 0.5) return 2;
    if (hjb_oracle1d_eval(-3.0, 0.0, &u) != HJB_STATUS_INFEASIBLE) return 3;
    if (hjb_last_error() == NULL) return 4;
    HjbProblem *p = NULL;
    if (hjb_problem_from_json("{\"geometry\": {\"kind\": \"square\", \"x\": [0, 1], \"y\": [0, 1], \"h\": 0.1}}", &p) != HJB_STATUS_OK) return 5;
    HjbSolution *s = NULL;
    if (hjb_solve(p, HJB_RULE_STRONG, &s) != HJB_STATUS_OK) return 6;
    size_t n = 0;
    hjb_problem_node_count(p, &n);
    double buf[121];
    if (n != 121 || hjb_solution_values(s, buf, n) != HJB_STATUS_OK) return 7;
    if (buf[60] < 0.45 || buf[60] > 0.55) return 8;
    hjb_solution_free(s);
    hjb_problem_free(p);
    printf("ok\n");
    return 0;
}
"#,
    )
    .unwrap();
    let syntax = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(&header_dir)
        .arg(&src)
        .status()
        .unwrap();
    assert!(syntax.success(), "header does not compile as C");
    let lib = target_dir().join("libhjb_transmission_ffi.a");
    if !lib.exists() {
        eprintln!("static library not found at {}; link step skipped", lib.display());
        return;
    }
    let exe = dir.path().join("main");
    let link = Command::new("cc")
        .arg("-I")
        .arg(&header_dir)
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(link.success(), "linking against the static library failed");
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "C program exited with {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
