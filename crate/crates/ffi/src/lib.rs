//! C ABI for the sdpsieve presolver.
//!
//! Handles are opaque: parse a problem, reduce it, then query the outcome or
//! serialize it back to text. Every function returns a status code; the
//! descriptive message of the most recent failure on the current thread is
//! available through [`sdpsieve_last_error`].
//!
//! Strings returned through `char**` are owned by the library and must be
//! released with [`sdpsieve_string_free`]; multiplier arrays with
//! [`sdpsieve_doubles_free`].

use sdpsieve::io;
use sdpsieve::metrics::dimacs_errors;
use sdpsieve::model::{SdpProblem, SieveOutcome as CoreOutcome};
use sdpsieve::recovery::{basic_recovery, RecoveryOptions, RecoveryResult};
use sdpsieve::sieve::{sieve, SieveOptions};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status of an FFI call. `Ok` is zero; mathematical verdicts reuse the CLI
/// exit-code values (10 infeasible, 11 recovery failed).
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpSieveStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    Infeasible = 10,
    RecoveryFailed = 11,
    InternalError = 99,
}

/// Options for [`sdpsieve_reduce`]. Zero-initialize and adjust, or pass NULL
/// for the defaults (safe mode on, machine-epsilon tolerance, no cap).
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SdpSieveReduceOptions {
    /// Nonzero enables the tolerance-banded safe mode.
    pub safe_mode: i32,
    /// Base tolerance; must be positive. Pass 0.0 for the default 2^-52.
    pub eps: f64,
    /// Cap on certificate steps; 0 means unlimited.
    pub max_iterations: u64,
}

/// Opaque parsed problem.
pub struct SdpSieveProblem {
    inner: SdpProblem,
}

/// Opaque reduction outcome.
pub struct SdpSieveOutcome {
    inner: CoreOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(message: impl AsRef<str>) {
    let sanitized: String = message.as_ref().chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

/// Message of the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sdpsieve_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn read_utf8<'a>(ptr: *const c_char) -> Result<&'a str, SdpSieveStatus> {
    if ptr.is_null() {
        set_last_error("null pointer argument");
        return Err(SdpSieveStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error("text is not valid UTF-8");
        SdpSieveStatus::InvalidUtf8
    })
}

fn guard(f: impl FnOnce() -> SdpSieveStatus) -> SdpSieveStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            SdpSieveStatus::InternalError
        }
    }
}

/// Parse a sparse SDPA problem from NUL-terminated text.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
/// The returned handle must be released with [`sdpsieve_problem_free`].
#[no_mangle]
pub unsafe extern "C" fn sdpsieve_problem_parse(
    text: *const c_char,
    out: *mut *mut SdpSieveProblem,
) -> SdpSieveStatus {
    guard(|| {
        if out.is_null() {
            set_last_error("null output pointer");
            return SdpSieveStatus::NullArgument;
        }
        let text = match read_utf8(text) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match io::read_sdpa(text) {
            Ok(problem) => {
                *out = Box::into_raw(Box::new(SdpSieveProblem { inner: problem }));
                SdpSieveStatus::Ok
            }
            Err(e) => {
                set_last_error(e.to_string());
                SdpSieveStatus::ParseError
            }
        }
    })
}

/// Release a problem handle. NULL is ignored.
///
/// # Safety
/// `problem` must come from [`sdpsieve_problem_parse`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sdpsieve_problem_free(problem: *mut SdpSieveProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Cone dimension, constraint count, and stored constraint nonzeros.
///
/// # Safety
/// `problem` must be valid; output pointers may be NULL to skip a field.
#[no_mangle]
pub unsafe extern "C" fn sdpsieve_problem_dims(
    problem: *const SdpSieveProblem,
    n: *mut usize,
    m: *mut usize,
    nnz: *mut usize,
) -> SdpSieveStatus {
    guard(|| {
        let Some(problem) = problem.as_ref() else {
            set_last_error("null problem handle");
            return SdpSieveStatus::NullArgument;
        };
        if let Some(n) = n.as_mut() {
            *n = problem.inner.structure.cone_dim();
        }
        if let Some(m) = m.as_mut() {
            *m = problem.inner.num_constraints();
        }
        if let Some(nnz) = nnz.as_mut() {
            *nnz = problem.inner.constraint_nnz();
        }
        SdpSieveStatus::Ok
    })
}

/// Run the sieve. Returns `Ok` for a reduction (possibly a no-op) and
/// `Infeasible` when infeasibility was certified; both set an outcome handle.
///
/// # Safety
/// `problem` and `out` must be valid; `options` may be NULL for defaults.
/// The outcome must be released with [`sdpsieve_outcome_free`].
#[no_mangle]
pub unsafe extern "C" fn sdpsieve_reduce(
    problem: *const SdpSieveProblem,
    options: *const SdpSieveReduceOptions,
    out: *mut *mut SdpSieveOutcome,
) -> SdpSieveStatus {
    guard(|| {
        let Some(problem) = problem.as_ref() else {
            set_last_error("null problem handle");
            return SdpSieveStatus::NullArgument;
        };
        if out.is_null() {
            set_last_error("null output pointer");
            return SdpSieveStatus::NullArgument;
        }
        let mut sieve_options = SieveOptions::default();
        if let Some(options) = options.as_ref() {
            sieve_options.safe_mode = options.safe_mode != 0;
            if options.eps != 0.0 {
                if !options.eps.is_finite() || options.eps <= 0.0 {
                    set_last_error("eps must be positive");
                    return SdpSieveStatus::InvalidArgument;
                }
                sieve_options.eps = options.eps;
            }
            if options.max_iterations > 0 {
                sieve_options.max_iterations = Some(options.max_iterations as usize);
            }
        }
        match sieve(&problem.inner, &sieve_options) {
            Ok(outcome) => {
                let infeasible = outcome.is_infeasible();
                *out = Box::into_raw(Box::new(SdpSieveOutcome { inner: outcome }));
                if infeasible {
                    SdpSieveStatus::Infeasible
                } else {
                    SdpSieveStatus::Ok
                }
            }
            Err(e) => {
                set_last_error(e.to_string());
                SdpSieveStatus::InvalidArgument
            }
        }
    })
}

/// Release an outcome handle. NULL is ignored.
///
/// # Safety
/// `outcome` must come from [`sdpsieve_reduce`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sdpsieve_outcome_free(outcome: *mut SdpSieveOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// 1 when the outcome certifies infeasibility, 0 otherwise (-1 on NULL).
///
/// # Safety
/// `outcome` must be a valid handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sdpsieve_outcome_is_infeasible(outcome: *const SdpSieveOutcome) -> i32 {
    match outcome.as_ref() {
        Some(o) => i32::from(o.inner.is_infeasible()),
        None => -1,
    }
}

/// Number of certificate steps (0 on NULL).
///
/// # Safety
/// `outcome` must be a valid handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sdpsieve_outcome_step_count(outcome: *const SdpSieveOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.inner.iteration_count)
}

fn string_out(text: String, out: *mut *mut c_char) -> SdpSieveStatus {
    match CString::new(text) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            SdpSieveStatus::Ok
        }
        Err(_) => {
            set_last_error("text contains an interior NUL byte");
            SdpSieveStatus::InternalError
        }
    }
}

/// Reduced problem in canonical sparse SDPA text. Fails with
/// `InvalidArgument` when the outcome certified infeasibility.
///
/// # Safety
/// Pointers must be valid; free the string with [`sdpsieve_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sdpsieve_outcome_reduced_sdpa(
    outcome: *const SdpSieveOutcome,
    out: *mut *mut c_char,
) -> SdpSieveStatus {
    guard(|| {
        let Some(outcome) = outcome.as_ref() else {
            set_last_error("null outcome handle");
            return SdpSieveStatus::NullArgument;
        };
        if out.is_null() {
            set_last_error("null output pointer");
            return SdpSieveStatus::NullArgument;
        }
        let Some(reduced) = outcome.inner.reduced_problem() else {
            set_last_error("the outcome certifies infeasibility; there is no reduced problem");
            return SdpSieveStatus::InvalidArgument;
        };
        match io::write_sdpa(reduced) {
            Ok(text) => string_out(text, out),
            Err(e) => {
                set_last_error(e.to_string());
                SdpSieveStatus::InvalidArgument
            }
        }
    })
}

/// The reduction certificate as versioned text.
///
/// # Safety
/// Pointers must be valid; free the string with [`sdpsieve_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sdpsieve_outcome_certificate(
    outcome: *const SdpSieveOutcome,
    out: *mut *mut c_char,
) -> SdpSieveStatus {
    guard(|| {
        let Some(outcome) = outcome.as_ref() else {
            set_last_error("null outcome handle");
            return SdpSieveStatus::NullArgument;
        };
        if out.is_null() {
            set_last_error("null output pointer");
            return SdpSieveStatus::NullArgument;
        }
        string_out(io::write_certificate(outcome.inner.certificate()), out)
    })
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `text` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sdpsieve_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

/// Score a solution file against the problem: writes the six DIMACS errors
/// into `errors[0..6]` and their largest absolute value into `max_abs`.
///
/// # Safety
/// `errors` must point to at least six doubles; `max_abs` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sdpsieve_dimacs(
    problem: *const SdpSieveProblem,
    solution_text: *const c_char,
    errors: *mut f64,
    max_abs: *mut f64,
) -> SdpSieveStatus {
    guard(|| {
        let Some(problem) = problem.as_ref() else {
            set_last_error("null problem handle");
            return SdpSieveStatus::NullArgument;
        };
        if errors.is_null() {
            set_last_error("null errors pointer");
            return SdpSieveStatus::NullArgument;
        }
        let text = match read_utf8(solution_text) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let solution = match io::read_solution(text, &problem.inner) {
            Ok(s) => s,
            Err(e) => {
                set_last_error(e.to_string());
                return SdpSieveStatus::ParseError;
            }
        };
        match dimacs_errors(&problem.inner, &solution) {
            Ok(e) => {
                let values = e.as_array();
                for (idx, v) in values.iter().enumerate() {
                    *errors.add(idx) = *v;
                }
                if let Some(max_abs) = max_abs.as_mut() {
                    *max_abs = e.max_abs();
                }
                SdpSieveStatus::Ok
            }
            Err(e) => {
                set_last_error(e.to_string());
                SdpSieveStatus::InvalidArgument
            }
        }
    })
}

/// Extend reduced dual multipliers to the original problem through the
/// certificate text. On `Ok`, `*y_out`/`*y_out_len` receive the full
/// multiplier vector (release with [`sdpsieve_doubles_free`]). On
/// `RecoveryFailed`, `*failed_step` receives the certificate step index.
///
/// # Safety
/// Pointer arguments must be valid; `y_reduced` must hold `y_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sdpsieve_recover(
    problem: *const SdpSieveProblem,
    certificate_text: *const c_char,
    y_reduced: *const f64,
    y_len: usize,
    shift: f64,
    y_out: *mut *mut f64,
    y_out_len: *mut usize,
    failed_step: *mut usize,
) -> SdpSieveStatus {
    guard(|| {
        let Some(problem) = problem.as_ref() else {
            set_last_error("null problem handle");
            return SdpSieveStatus::NullArgument;
        };
        if (y_reduced.is_null() && y_len > 0) || y_out.is_null() || y_out_len.is_null() {
            set_last_error("null pointer argument");
            return SdpSieveStatus::NullArgument;
        }
        let text = match read_utf8(certificate_text) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let certificate = match io::read_certificate(text) {
            Ok(c) => c,
            Err(e) => {
                set_last_error(e.to_string());
                return SdpSieveStatus::ParseError;
            }
        };
        if !shift.is_finite() || shift <= 0.0 {
            set_last_error("shift must be positive");
            return SdpSieveStatus::InvalidArgument;
        }
        let y = if y_len == 0 { &[] } else { std::slice::from_raw_parts(y_reduced, y_len) };
        match basic_recovery(&problem.inner, &certificate, y, &RecoveryOptions { shift }) {
            Ok(RecoveryResult::Recovered { y }) => {
                let boxed = y.into_boxed_slice();
                *y_out_len = boxed.len();
                *y_out = Box::into_raw(boxed).cast();
                SdpSieveStatus::Ok
            }
            Ok(RecoveryResult::Failed { step_index }) => {
                if let Some(failed_step) = failed_step.as_mut() {
                    *failed_step = step_index;
                }
                set_last_error(format!("linesearch failed at certificate step {step_index}"));
                SdpSieveStatus::RecoveryFailed
            }
            Err(e) => {
                set_last_error(e.to_string());
                SdpSieveStatus::InvalidArgument
            }
        }
    })
}

/// Release a multiplier array returned by [`sdpsieve_recover`].
///
/// # Safety
/// `values` and `len` must come from this library unchanged.
#[no_mangle]
pub unsafe extern "C" fn sdpsieve_doubles_free(values: *mut f64, len: usize) {
    if !values.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(values, len)));
    }
}
