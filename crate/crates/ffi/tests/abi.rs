use std::ffi::{CStr, CString};
use std::ptr;

use pwaprox_ffi::*;

const EX51: &str = include_str!("../../core/data/ex51.json");

fn last_error() -> String {
    let p = pwaprox_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn ex51(horizon: usize) -> *mut PwaproxProblem {
    let json = CString::new(EX51).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { pwaprox_problem_from_pwa_json(json.as_ptr(), horizon, &mut p) }, PwaproxErrorCode::Ok);
    assert!(!p.is_null());
    p
}

#[test]
fn solve_admm_and_oracle_agree_on_example() {
    let p = ex51(10);
    let (mut n, mut d) = (0usize, 0usize);
    unsafe {
        assert_eq!(pwaprox_problem_dims(p, &mut n, &mut d), PwaproxErrorCode::Ok);
        assert_eq!(d, 2);
        let theta = [1.0, 1.0];

        let mut op = ptr::null_mut();
        assert_eq!(pwaprox_operator_new(p, 100.0, &mut op), PwaproxErrorCode::Ok);
        let mut z = vec![0.0; n];
        let mut s = PwaproxSummary { status: PwaproxSolveStatus::Diverged, iterations: 0, objective: 0.0, final_residual: 0.0 };
        let code = pwaprox_solve(p, op, theta.as_ptr(), 2, 0.5, 1e-8, 50_000, z.as_mut_ptr(), n, &mut s);
        assert_eq!(code, PwaproxErrorCode::Ok);
        assert_eq!(s.status, PwaproxSolveStatus::Converged);
        let fp = s.objective;

        let code = pwaprox_admm(p, theta.as_ptr(), 2, 10.0, 1e-6, 10_000, ptr::null_mut(), 0, &mut s);
        assert_eq!(code, PwaproxErrorCode::Ok);
        assert_eq!(s.status, PwaproxSolveStatus::Converged);

        let mut best = 0.0;
        assert_eq!(pwaprox_oracle(p, theta.as_ptr(), 2, 0, z.as_mut_ptr(), n, &mut best), PwaproxErrorCode::Ok);
        assert!(best <= fp + 1e-9);
        assert!((fp - best) / best <= 0.01, "{fp} vs {best}");

        pwaprox_operator_free(op);
        pwaprox_problem_free(p);
    }
}

#[test]
fn errors_are_reported_with_codes_and_messages() {
    let p = ex51(5);
    unsafe {
        let mut op = ptr::null_mut();
        assert_eq!(pwaprox_operator_new(p, 0.5, &mut op), PwaproxErrorCode::XiTooSmall);
        assert!(op.is_null());
        assert!(last_error().contains("too small"), "{}", last_error());

        let mut n = 0usize;
        assert_eq!(pwaprox_problem_dims(ptr::null(), &mut n, &mut n), PwaproxErrorCode::NullPointer);

        let bad = CString::new("{not json").unwrap();
        let mut q = ptr::null_mut();
        assert_eq!(pwaprox_problem_from_json(bad.as_ptr(), &mut q), PwaproxErrorCode::InvalidInput);

        let mut best = 0.0;
        let theta = [1.0];
        assert_eq!(
            pwaprox_oracle(p, theta.as_ptr(), 1, 0, ptr::null_mut(), 0, &mut best),
            PwaproxErrorCode::DimensionMismatch
        );
        assert_eq!(pwaprox_oracle(p, [1.0, 1.0].as_ptr(), 2, 2, ptr::null_mut(), 0, &mut best), PwaproxErrorCode::LimitExceeded);

        let mut sat = -1;
        assert_eq!(pwaprox_check_a3(p, &mut sat), PwaproxErrorCode::Ok);
        assert!(sat == 0 || sat == 1);
        assert!(pwaprox_last_error_message().is_null());

        pwaprox_problem_free(p);
        pwaprox_problem_free(ptr::null_mut());
    }
}

#[test]
fn consensus_json_round_trip() {
    let pr = pwaprox::mpc::PwaFile::from_json_str_with_horizon(EX51, 3).unwrap().build().unwrap();
    let json = CString::new(pr.to_json_string()).unwrap();
    let mut p = ptr::null_mut();
    let (mut n, mut d) = (0usize, 0usize);
    unsafe {
        assert_eq!(pwaprox_problem_from_json(json.as_ptr(), &mut p), PwaproxErrorCode::Ok);
        assert_eq!(pwaprox_problem_dims(p, &mut n, &mut d), PwaproxErrorCode::Ok);
        pwaprox_problem_free(p);
    }
    assert_eq!((n, d), (pr.n(), pr.param_dim()));
    assert!(!unsafe { CStr::from_ptr(pwaprox_version()) }.to_bytes().is_empty());
}

#[test]
fn header_declares_every_export_and_compiles_as_c() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/pwaprox.h")).unwrap();
    let src = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 10);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    // Syntax-check the header when a C compiler is available.
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", "-std=c11"])
        .arg(dir.join("include/pwaprox.h"))
        .output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
