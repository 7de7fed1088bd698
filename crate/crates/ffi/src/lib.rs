//! C ABI over `hjb-transmission`.
//!
//! Every function returns an [`HjbStatus`]; on failure the message is available
//! from [`hjb_last_error`] on the same thread. Handles are opaque and must be
//! released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hjb_transmission::closed_forms::{binding_rho, solve_1d_family, solve_annulus};
use hjb_transmission::config::ExperimentConfig;
use hjb_transmission::geometry::GridFunction;
use hjb_transmission::operators::{pucci_minus, pucci_plus};
use hjb_transmission::scheme::{solve, InterfaceRule, TransmissionProblem};
use hjb_transmission::verifier::{verify, CheckRule, TOL_FACTOR};
use hjb_transmission::Error;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HjbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Validation = 4,
    Infeasible = 5,
    Usage = 6,
    Internal = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HjbRule {
    Relaxed = 0,
    Strong = 1,
}

/// Closed-form annulus constants.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct HjbAnnulus {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub slope_at_rho: f64,
}

/// Opaque problem handle.
pub struct HjbProblem {
    problem: TransmissionProblem,
    config: ExperimentConfig,
}

/// Opaque solution handle.
pub struct HjbSolution {
    u: GridFunction,
    diagnostics: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HjbStatus {
    match e {
        Error::Config(_) | Error::Json(_) => HjbStatus::Config,
        Error::Validation(_) | Error::Csv(_) => HjbStatus::Validation,
        Error::Infeasible(_) => HjbStatus::Infeasible,
        Error::Usage(_) => HjbStatus::Usage,
        Error::Internal(_) => HjbStatus::Internal,
        Error::Io(_) => HjbStatus::Io,
    }
}

fn fail(status: HjbStatus, msg: impl Into<String>) -> HjbStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), HjbStatus>) -> HjbStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HjbStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(HjbStatus::Panic, "panic inside hjb-transmission"),
    }
}

fn lift<T>(r: hjb_transmission::Result<T>) -> Result<T, HjbStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), HjbStatus> {
    if p.is_null() {
        Err(fail(HjbStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn hjb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses an experiment configuration and builds the problem.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hjb_problem_from_json(json: *const c_char, out: *mut *mut HjbProblem) -> HjbStatus {
    guard(|| {
        non_null(json, "json")?;
        non_null(out, "out")?;
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|_| fail(HjbStatus::InvalidUtf8, "configuration is not valid UTF-8"))?;
        let config = lift(ExperimentConfig::from_json(text))?;
        let problem = lift(config.build_problem())?;
        unsafe { *out = Box::into_raw(Box::new(HjbProblem { problem, config })) };
        Ok(())
    })
}

/// # Safety
/// `p` must come from `hjb_problem_from_json` (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hjb_problem_free(p: *mut HjbProblem) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Number of grid nodes (including boundary and exterior nodes).
///
/// # Safety
/// `p` must be a live problem handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hjb_problem_node_count(p: *const HjbProblem, out: *mut usize) -> HjbStatus {
    guard(|| {
        non_null(p, "problem")?;
        non_null(out, "out")?;
        unsafe { *out = (*p).problem.grid.len() };
        Ok(())
    })
}

/// Solves with the given interface rule.
///
/// # Safety
/// `p` must be a live problem handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hjb_solve(p: *const HjbProblem, rule: HjbRule, out: *mut *mut HjbSolution) -> HjbStatus {
    guard(|| {
        non_null(p, "problem")?;
        non_null(out, "out")?;
        let handle = unsafe { &*p };
        let mut cfg = handle.config.solver.clone();
        cfg.rule = match rule {
            HjbRule::Relaxed => InterfaceRule::RelaxedMin,
            HjbRule::Strong => InterfaceRule::StrongEikonal,
        };
        let (u, d) = lift(solve(&handle.problem, &cfg))?;
        let text = serde_json::to_string(&d).map_err(|e| fail(HjbStatus::Internal, e.to_string()))?;
        let diagnostics = CString::new(text).map_err(|e| fail(HjbStatus::Internal, e.to_string()))?;
        unsafe { *out = Box::into_raw(Box::new(HjbSolution { u, diagnostics })) };
        Ok(())
    })
}

/// Copies the nodal values (NaN at exterior nodes) into `buf`.
/// Fails with `BufferTooSmall` if `len` is below the node count.
///
/// # Safety
/// `s` must be a live solution handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hjb_solution_values(s: *const HjbSolution, buf: *mut f64, len: usize) -> HjbStatus {
    guard(|| {
        non_null(s, "solution")?;
        non_null(buf, "buf")?;
        let values = unsafe { (*s).u.values() };
        if len < values.len() {
            return Err(fail(
                HjbStatus::BufferTooSmall,
                format!("buffer holds {len} values, solution has {}", values.len()),
            ));
        }
        unsafe { ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len()) };
        Ok(())
    })
}

/// Solver diagnostics as JSON, owned by the solution handle.
///
/// # Safety
/// `s` must be a live solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn hjb_solution_diagnostics(s: *const HjbSolution) -> *const c_char {
    if s.is_null() {
        return ptr::null();
    }
    unsafe { (*s).diagnostics.as_ptr() }
}

/// # Safety
/// `s` must come from `hjb_solve` (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hjb_solution_free(s: *mut HjbSolution) {
    if !s.is_null() {
        drop(unsafe { Box::from_raw(s) });
    }
}

/// Runs the discrete viscosity checks. `tol <= 0` selects `10h`.
/// `worst` receives the largest violation residual (0 when passing).
///
/// # Safety
/// Handles must be live and belong together; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn hjb_verify(
    p: *const HjbProblem,
    s: *const HjbSolution,
    rule: HjbRule,
    tol: f64,
    pass: *mut bool,
    worst: *mut f64,
) -> HjbStatus {
    guard(|| {
        non_null(p, "problem")?;
        non_null(s, "solution")?;
        non_null(pass, "pass")?;
        non_null(worst, "worst")?;
        let (problem, u) = unsafe { (&(*p).problem, &(*s).u) };
        let tol = if tol > 0.0 { tol } else { TOL_FACTOR * problem.grid.h() };
        let rule = match rule {
            HjbRule::Relaxed => CheckRule::Relaxed,
            HjbRule::Strong => CheckRule::Strong,
        };
        let rep = lift(verify(u, problem, rule, tol))?;
        unsafe {
            *pass = rep.pass;
            *worst = rep.worst.map_or(0.0, |v| v.residual);
        }
        Ok(())
    })
}

/// Closed-form 1D solution with `u(-1) = 0`, `u(1) = alpha` at `x`.
/// `Infeasible` for `alpha < -2`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hjb_oracle1d_eval(alpha: f64, x: f64, out: *mut f64) -> HjbStatus {
    guard(|| {
        non_null(out, "out")?;
        let sol = solve_1d_family(alpha)
            .solution()
            .ok_or_else(|| fail(HjbStatus::Infeasible, format!("no solution for α = {alpha}")))?;
        unsafe { *out = lift(sol.eval(x))? };
        Ok(())
    })
}

/// Annulus constants; a NaN `rho` selects the radius where the slope constraint binds.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hjb_annulus_solve(n: u32, r: f64, big_r: f64, rho: f64, out: *mut HjbAnnulus) -> HjbStatus {
    guard(|| {
        non_null(out, "out")?;
        let rho = if rho.is_nan() { lift(binding_rho(n, r, big_r))? } else { rho };
        let sol = lift(solve_annulus(n, r, big_r, rho))?;
        unsafe {
            *out = HjbAnnulus {
                a: sol.a,
                b: sol.b,
                rho: sol.rho,
                slope_at_rho: sol.slope_at_rho(),
            }
        };
        Ok(())
    })
}

/// `M⁺` (or `M⁻` when `plus` is false) of the row-major symmetric `dim × dim` matrix.
///
/// # Safety
/// `m` must hold `dim * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hjb_pucci(
    m: *const f64,
    dim: usize,
    lambda: f64,
    lambda_bar: f64,
    plus: bool,
    out: *mut f64,
) -> HjbStatus {
    guard(|| {
        non_null(m, "matrix")?;
        non_null(out, "out")?;
        if dim == 0 {
            return Err(fail(HjbStatus::Usage, "dimension must be positive"));
        }
        let data = unsafe { std::slice::from_raw_parts(m, dim * dim) };
        let mat = DMatrix::from_row_slice(dim, dim, data);
        let v = if plus {
            pucci_plus(&mat, lambda, lambda_bar)
        } else {
            pucci_minus(&mat, lambda, lambda_bar)
        };
        unsafe { *out = lift(v)? };
        Ok(())
    })
}
