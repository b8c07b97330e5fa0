//! C ABI over `pwaprox`.
//!
//! Problems and operators are opaque handles created by `*_new`/`*_from_*`
//! and released by the matching `*_free`. Every fallible call returns a
//! [`PwaproxErrorCode`]; the message of the last failure on the calling
//! thread is available from [`pwaprox_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use pwaprox::a3check::check_a3;
use pwaprox::admm::{solve_admm, AdmmConfig};
use pwaprox::mpc::PwaFile;
use pwaprox::operator::{build_operator, OperatorData};
use pwaprox::oracle::{global_solve, DEFAULT_CAP};
use pwaprox::problem::ConsensusProblem;
use pwaprox::solver::{solve, SolveResult, SolveStatus, SolverConfig};
use pwaprox::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwaproxErrorCode {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    XiTooSmall = 4,
    Infeasible = 5,
    Numerical = 6,
    LimitExceeded = 7,
    Panic = 8,
}

/// Outcome of an iterative solve, mirrored from the library's status.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwaproxSolveStatus {
    TrivialGlobal = 0,
    Converged = 1,
    MaxIterations = 2,
    Diverged = 3,
    StageInfeasible = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PwaproxSummary {
    pub status: PwaproxSolveStatus,
    pub iterations: usize,
    pub objective: f64,
    pub final_residual: f64,
}

/// Opaque problem handle.
pub struct PwaproxProblem {
    inner: ConsensusProblem,
}

/// Opaque handle for the precomputed fixed-point operator.
pub struct PwaproxOperator {
    inner: OperatorData,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn code_for(err: &Error) -> PwaproxErrorCode {
    match err {
        Error::DimensionMismatch(_) => PwaproxErrorCode::DimensionMismatch,
        Error::XiTooSmall { .. } => PwaproxErrorCode::XiTooSmall,
        Error::Infeasible(_) | Error::StageInfeasible(_) | Error::NoActiveRegion { .. } => PwaproxErrorCode::Infeasible,
        Error::TooManyCombinations { .. } | Error::BlowUp { .. } | Error::CombinatorialCap { .. } => {
            PwaproxErrorCode::LimitExceeded
        }
        Error::InvalidInput(_) | Error::NotSymmetric { .. } | Error::RankDeficient { .. } | Error::NotPositiveDefinite => {
            PwaproxErrorCode::InvalidInput
        }
        _ => PwaproxErrorCode::Numerical,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, recording failures and converting panics into an error code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PwaproxErrorCode {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PwaproxErrorCode::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            PwaproxErrorCode::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            code_for(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            PwaproxErrorCode::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::InvalidInput(format!("{what} is not UTF-8"))))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn copy_vec(src: &[f64], dst: *mut f64, len: usize) -> Result<(), Failure> {
    if dst.is_null() {
        return Ok(());
    }
    if len != src.len() {
        return Err(Error::DimensionMismatch(format!("z_out has length {len}, expected {}", src.len())).into());
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), dst, len);
    Ok(())
}

fn summary(r: &SolveResult) -> PwaproxSummary {
    let status = match r.status {
        SolveStatus::TrivialGlobal => PwaproxSolveStatus::TrivialGlobal,
        SolveStatus::Converged => PwaproxSolveStatus::Converged,
        SolveStatus::MaxIterations => PwaproxSolveStatus::MaxIterations,
        SolveStatus::Diverged => PwaproxSolveStatus::Diverged,
        SolveStatus::StageInfeasible => PwaproxSolveStatus::StageInfeasible,
    };
    PwaproxSummary { status, iterations: r.iterations, objective: r.objective, final_residual: r.final_residual() }
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failure on this thread, or null. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn pwaprox_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn pwaprox_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a consensus problem from its JSON form.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pwaprox_problem_from_json(json: *const c_char, out: *mut *mut PwaproxProblem) -> PwaproxErrorCode {
    guard(|| {
        let text = str_arg(json, "json")?;
        let inner = ConsensusProblem::from_json_str(text)?;
        write_out(out, boxed(PwaproxProblem { inner }), "out")
    })
}

/// Builds the MPC problem of a PWA system file. `horizon == 0` keeps the file's horizon.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pwaprox_problem_from_pwa_json(
    json: *const c_char,
    horizon: usize,
    out: *mut *mut PwaproxProblem,
) -> PwaproxErrorCode {
    guard(|| {
        let text = str_arg(json, "json")?;
        let file = if horizon == 0 { PwaFile::from_json_str(text)? } else { PwaFile::from_json_str_with_horizon(text, horizon)? };
        let inner = file.build()?;
        write_out(out, boxed(PwaproxProblem { inner }), "out")
    })
}

/// # Safety
/// `problem` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pwaprox_problem_free(problem: *mut PwaproxProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Writes the decision dimension and the parameter dimension.
///
/// # Safety
/// `problem` must be a live handle; `n` and `param_dim` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn pwaprox_problem_dims(
    problem: *const PwaproxProblem,
    n: *mut usize,
    param_dim: *mut usize,
) -> PwaproxErrorCode {
    guard(|| {
        let p = &deref(problem, "problem")?.inner;
        write_out(n, p.n(), "n")?;
        write_out(param_dim, p.param_dim(), "param_dim")
    })
}

/// Precomputes the fixed-point operator for scaling `xi`.
///
/// # Safety
/// `problem` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pwaprox_operator_new(
    problem: *const PwaproxProblem,
    xi: f64,
    out: *mut *mut PwaproxOperator,
) -> PwaproxErrorCode {
    guard(|| {
        let p = &deref(problem, "problem")?.inner;
        let inner = build_operator(p, xi)?;
        write_out(out, boxed(PwaproxOperator { inner }), "out")
    })
}

/// # Safety
/// `op` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pwaprox_operator_free(op: *mut PwaproxOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Runs the fixed-point iteration. `z_out` may be null; otherwise it receives `n` values.
/// A non-converged run still returns `Ok`; inspect `summary->status`.
///
/// # Safety
/// Handles must be live, `theta` must hold `theta_len` values, `z_out` must hold `z_len`
/// values when non-null, and `summary` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pwaprox_solve(
    problem: *const PwaproxProblem,
    op: *const PwaproxOperator,
    theta: *const f64,
    theta_len: usize,
    gamma: f64,
    eps_tol: f64,
    max_iter: usize,
    z_out: *mut f64,
    z_len: usize,
    summary_out: *mut PwaproxSummary,
) -> PwaproxErrorCode {
    guard(|| {
        let p = &deref(problem, "problem")?.inner;
        let o = &deref(op, "op")?.inner;
        let theta = slice_arg(theta, theta_len, "theta")?;
        let mut cfg = SolverConfig::new(o.xi);
        cfg.gamma = gamma;
        cfg.eps_tol = eps_tol;
        cfg.max_iter = max_iter;
        let r = solve(p, theta, o, &cfg)?;
        copy_vec(&r.y, z_out, z_len)?;
        write_out(summary_out, summary(&r), "summary")
    })
}

/// ADMM baseline with penalty `rho`. Output conventions follow [`pwaprox_solve`].
///
/// # Safety
/// As for [`pwaprox_solve`].
#[no_mangle]
pub unsafe extern "C" fn pwaprox_admm(
    problem: *const PwaproxProblem,
    theta: *const f64,
    theta_len: usize,
    rho: f64,
    eps_tol: f64,
    max_iter: usize,
    z_out: *mut f64,
    z_len: usize,
    summary_out: *mut PwaproxSummary,
) -> PwaproxErrorCode {
    guard(|| {
        let p = &deref(problem, "problem")?.inner;
        let theta = slice_arg(theta, theta_len, "theta")?;
        let mut cfg = AdmmConfig::new(rho);
        cfg.eps_tol = eps_tol;
        cfg.max_iter = max_iter;
        let r = solve_admm(p, theta, &cfg)?;
        copy_vec(&r.y, z_out, z_len)?;
        write_out(summary_out, summary(&r), "summary")
    })
}

/// Global optimum by enumeration. `cap == 0` uses the default combination cap.
///
/// # Safety
/// `problem` must be live, `theta` must hold `theta_len` values, `z_out` must hold
/// `z_len` values when non-null, and `objective` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pwaprox_oracle(
    problem: *const PwaproxProblem,
    theta: *const f64,
    theta_len: usize,
    cap: u64,
    z_out: *mut f64,
    z_len: usize,
    objective: *mut f64,
) -> PwaproxErrorCode {
    guard(|| {
        let p = &deref(problem, "problem")?.inner;
        let theta = slice_arg(theta, theta_len, "theta")?;
        let cap = if cap == 0 { DEFAULT_CAP } else { u128::from(cap) };
        let g = global_solve(p, theta, cap)?;
        copy_vec(&g.z, z_out, z_len)?;
        write_out(objective, g.objective, "objective")
    })
}

/// Writes 1 when every stage set satisfies the regularity check, 0 otherwise.
///
/// # Safety
/// `problem` must be live and `satisfied` writable.
#[no_mangle]
pub unsafe extern "C" fn pwaprox_check_a3(problem: *const PwaproxProblem, satisfied: *mut c_int) -> PwaproxErrorCode {
    guard(|| {
        let p = &deref(problem, "problem")?.inner;
        let report = check_a3(p.stages())?;
        write_out(satisfied, c_int::from(report.satisfied), "satisfied")
    })
}
