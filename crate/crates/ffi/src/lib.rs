//! C ABI for `lllround`.
//!
//! Every fallible call returns an [`LllStatus`]; on failure a message is
//! available from [`lll_last_error`] on the same thread. Objects are
//! opaque handles released by their `_free` function. Strings returned to
//! the caller are freed with [`lll_string_free`].
//!
//! Array getters follow one convention: `*written` receives the required
//! length; pass `buf = NULL` to query it, otherwise `len` must be large
//! enough or `LLL_STATUS_BUFFER_TOO_SMALL` is returned.

#![deny(unsafe_op_in_unsafe_fn)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lllround::cip::{derandomize_single, RoundedSolution};
use lllround::lp::{ingest_solution, solve_cip_lp, solve_mip_lp, LpStatus};
use lllround::mip::{las_vegas_mip, LasVegasReport};
use lllround::model::{parse_instance, serialize_instance, FractionalSolution, Instance};
use lllround::{tail, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LllStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Domain = 3,
    Parse = 4,
    Validation = 5,
    Dimension = 6,
    Infeasible = 7,
    Generation = 8,
    Budget = 9,
    Precondition = 10,
    ParameterSearch = 11,
    Internal = 12,
    Io = 13,
    BufferTooSmall = 14,
    WrongKind = 15,
    Panic = 16,
}

impl From<&Error> for LllStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => LllStatus::Domain,
            Error::Parse { .. } => LllStatus::Parse,
            Error::Validation { .. } => LllStatus::Validation,
            Error::Dimension { .. } => LllStatus::Dimension,
            Error::Infeasible { .. } => LllStatus::Infeasible,
            Error::Generation(_) => LllStatus::Generation,
            Error::Budget(_) => LllStatus::Budget,
            Error::Precondition(_) => LllStatus::Precondition,
            Error::ParameterSearch(_) => LllStatus::ParameterSearch,
            Error::Internal(_) => LllStatus::Internal,
            Error::Io(_) => LllStatus::Io,
        }
    }
}

/// Parsed CIP or MIP instance.
pub struct LllInstance(Instance);

/// Fractional solution x* with its objective.
pub struct LllSolution {
    x: FractionalSolution,
    objective: f64,
}

/// Derandomized CIP solution.
pub struct LllRounded(RoundedSolution);

/// Las Vegas MIP rounding result.
pub struct LllMipResult(LasVegasReport);

/// Overrides for [`lll_derandomize`]; NaN keeps the default.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LllRoundOptions {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: LllStatus, msg: &str) -> LllStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), LllStatus>) -> LllStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LllStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(LllStatus::Panic, "panic inside lllround"),
    }
}

fn lib<T>(r: lllround::Result<T>) -> Result<T, LllStatus> {
    r.map_err(|e| fail(LllStatus::from(&e), &e.to_string()))
}

unsafe fn borrow<'a, T>(p: *const T) -> Result<&'a T, LllStatus> {
    // SAFETY: callers pass either NULL or a handle returned by this library.
    unsafe { p.as_ref() }.ok_or_else(|| fail(LllStatus::NullPointer, "null handle"))
}

unsafe fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, LllStatus> {
    // SAFETY: callers pass either NULL or a writable location.
    unsafe { p.as_mut() }.ok_or_else(|| fail(LllStatus::NullPointer, "null output pointer"))
}

unsafe fn copy_out<T: Copy>(src: &[T], buf: *mut T, len: usize, written: *mut usize) -> Result<(), LllStatus> {
    // SAFETY: forwarded caller contract.
    *unsafe { out_ptr(written) }? = src.len();
    if buf.is_null() {
        return Ok(());
    }
    if len < src.len() {
        return Err(fail(
            LllStatus::BufferTooSmall,
            &format!("buffer holds {len}, need {}", src.len()),
        ));
    }
    // SAFETY: buf has room for len >= src.len() elements.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len()) };
    Ok(())
}

/// Message of the last failed call on this thread ("" after a success).
/// Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn lll_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static, nul-terminated version string.
#[no_mangle]
pub extern "C" fn lll_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn lll_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by CString::into_raw below.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lll_instance_from_json(json: *const c_char, out: *mut *mut LllInstance) -> LllStatus {
    guard(|| {
        let out = unsafe { out_ptr(out) }?;
        *out = ptr::null_mut();
        let text = unsafe { borrow(json) }?;
        // SAFETY: checked non-null; caller guarantees termination.
        let text = unsafe { CStr::from_ptr(text) }
            .to_str()
            .map_err(|_| fail(LllStatus::InvalidUtf8, "instance JSON is not UTF-8"))?;
        let inst = lib(parse_instance(text))?;
        *out = Box::into_raw(Box::new(LllInstance(inst)));
        Ok(())
    })
}

/// Canonical JSON of the instance; free with [`lll_string_free`].
///
/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lll_instance_to_json(inst: *const LllInstance, out: *mut *mut c_char) -> LllStatus {
    guard(|| {
        let out = unsafe { out_ptr(out) }?;
        let inst = unsafe { borrow(inst) }?;
        *out = CString::new(serialize_instance(&inst.0)).expect("JSON has no nul").into_raw();
        Ok(())
    })
}

/// 0 for a CIP, 1 for a MIP, -1 for NULL.
///
/// # Safety
/// `inst` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lll_instance_kind(inst: *const LllInstance) -> i32 {
    match unsafe { inst.as_ref() } {
        Some(LllInstance(Instance::Cip(_))) => 0,
        Some(LllInstance(Instance::Mip(_))) => 1,
        None => -1,
    }
}

/// Rows and columns of the constraint matrix.
///
/// # Safety
/// `inst` must be a live handle; `rows` and `cols` writable.
#[no_mangle]
pub unsafe extern "C" fn lll_instance_dims(inst: *const LllInstance, rows: *mut usize, cols: *mut usize) -> LllStatus {
    guard(|| {
        let inst = unsafe { borrow(inst) }?;
        let (m, n) = match &inst.0 {
            Instance::Cip(c) => (c.rows(), c.cols()),
            Instance::Mip(m) => (m.rows(), m.cols()),
        };
        *unsafe { out_ptr(rows) }? = m;
        *unsafe { out_ptr(cols) }? = n;
        Ok(())
    })
}

/// # Safety
/// `inst` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lll_instance_free(inst: *mut LllInstance) {
    if !inst.is_null() {
        // SAFETY: produced by Box::into_raw.
        drop(unsafe { Box::from_raw(inst) });
    }
}

/// Solves the LP relaxation (first objective for CIPs).
///
/// # Safety
/// `inst` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lll_solve_lp(inst: *const LllInstance, out: *mut *mut LllSolution) -> LllStatus {
    guard(|| {
        let out = unsafe { out_ptr(out) }?;
        *out = ptr::null_mut();
        let inst = unsafe { borrow(inst) }?;
        let r = match &inst.0 {
            Instance::Cip(c) => lib(solve_cip_lp(c, 0))?,
            Instance::Mip(m) => lib(solve_mip_lp(m))?,
        };
        match r.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(fail(LllStatus::Infeasible, "LP relaxation is infeasible")),
            s => return Err(fail(LllStatus::Internal, &format!("LP solver stopped with status {s:?}"))),
        }
        *out = Box::into_raw(Box::new(LllSolution {
            objective: r.objective,
            x: r.x,
        }));
        Ok(())
    })
}

/// Validates an external x* of length `n` against the instance.
///
/// # Safety
/// `x` must point to `n` doubles; `inst` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lll_solution_from_values(
    inst: *const LllInstance,
    x: *const f64,
    n: usize,
    out: *mut *mut LllSolution,
) -> LllStatus {
    guard(|| {
        let out = unsafe { out_ptr(out) }?;
        *out = ptr::null_mut();
        let inst = unsafe { borrow(inst) }?;
        let x = unsafe { borrow(x) }?;
        // SAFETY: caller guarantees n readable doubles.
        let x = unsafe { std::slice::from_raw_parts(x, n) };
        let sol = lib(ingest_solution(&inst.0, x))?;
        let objective = match &inst.0 {
            Instance::Cip(c) => c.objective(0, &sol.x),
            Instance::Mip(m) => m.max_load(&sol.x),
        };
        *out = Box::into_raw(Box::new(LllSolution { x: sol, objective }));
        Ok(())
    })
}

/// y* of the solution; NaN for NULL.
///
/// # Safety
/// `sol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lll_solution_objective(sol: *const LllSolution) -> f64 {
    unsafe { sol.as_ref() }.map_or(f64::NAN, |s| s.objective)
}

/// # Safety
/// `sol` live; `buf` NULL or `len` writable doubles; `written` writable.
#[no_mangle]
pub unsafe extern "C" fn lll_solution_values(
    sol: *const LllSolution,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> LllStatus {
    guard(|| {
        let sol = unsafe { borrow(sol) }?;
        unsafe { copy_out(&sol.x.x, buf, len, written) }
    })
}

/// # Safety
/// `sol` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lll_solution_free(sol: *mut LllSolution) {
    if !sol.is_null() {
        // SAFETY: produced by Box::into_raw.
        drop(unsafe { Box::from_raw(sol) });
    }
}

/// Deterministic rounding of a CIP solution. `options` may be NULL.
///
/// # Safety
/// `inst`, `sol` live; `options` NULL or readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lll_derandomize(
    inst: *const LllInstance,
    sol: *const LllSolution,
    options: *const LllRoundOptions,
    out: *mut *mut LllRounded,
) -> LllStatus {
    guard(|| {
        let out = unsafe { out_ptr(out) }?;
        *out = ptr::null_mut();
        let Instance::Cip(cip) = &unsafe { borrow(inst) }?.0 else {
            return Err(fail(LllStatus::WrongKind, "derandomization needs a CIP instance"));
        };
        let sol = unsafe { borrow(sol) }?;
        let opts = unsafe { options.as_ref() }.copied();
        let pick = |v: f64| (!v.is_nan()).then_some(v);
        let (alpha_beta, lambda) = match opts {
            Some(o) => {
                let ab = match (pick(o.alpha), pick(o.beta)) {
                    (None, None) => None,
                    (Some(a), Some(b)) => Some((a, b)),
                    _ => return Err(fail(LllStatus::Validation, "alpha and beta must be overridden together")),
                };
                (ab, pick(o.lambda))
            }
            None => (None, None),
        };
        let (rounded, _) = lib(derandomize_single(cip, &sol.x, alpha_beta, lambda))?;
        *out = Box::into_raw(Box::new(LllRounded(rounded)));
        Ok(())
    })
}

/// c·z for the first objective; NaN for NULL.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lll_rounded_value(r: *const LllRounded) -> f64 {
    unsafe { r.as_ref() }.map_or(f64::NAN, |r| r.0.objective_values.first().copied().unwrap_or(0.0))
}

/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lll_rounded_feasible(r: *const LllRounded) -> bool {
    unsafe { r.as_ref() }.is_some_and(|r| r.0.feasible)
}

/// Estimator evaluations spent; 0 for NULL.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lll_rounded_phi_evaluations(r: *const LllRounded) -> usize {
    unsafe { r.as_ref() }.map_or(0, |r| r.0.phi_evaluations)
}

/// # Safety
/// `r` live; `buf` NULL or `len` writable entries; `written` writable.
#[no_mangle]
pub unsafe extern "C" fn lll_rounded_z(r: *const LllRounded, buf: *mut u64, len: usize, written: *mut usize) -> LllStatus {
    guard(|| {
        let r = unsafe { borrow(r) }?;
        unsafe { copy_out(&r.0.z, buf, len, written) }
    })
}

/// # Safety
/// `r` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lll_rounded_free(r: *mut LllRounded) {
    if !r.is_null() {
        // SAFETY: produced by Box::into_raw.
        drop(unsafe { Box::from_raw(r) });
    }
}

/// Repeated randomized rounding of a MIP until the load target is met
/// or `max_tries` trials are spent. Not reaching the target is not an
/// error; check [`lll_mip_result_success`].
///
/// # Safety
/// `inst`, `sol` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lll_las_vegas(
    inst: *const LllInstance,
    sol: *const LllSolution,
    max_tries: usize,
    seed: u64,
    out: *mut *mut LllMipResult,
) -> LllStatus {
    guard(|| {
        let out = unsafe { out_ptr(out) }?;
        *out = ptr::null_mut();
        let Instance::Mip(mip) = &unsafe { borrow(inst) }?.0 else {
            return Err(fail(LllStatus::WrongKind, "Las Vegas rounding needs a MIP instance"));
        };
        let sol = unsafe { borrow(sol) }?;
        let r = lib(las_vegas_mip(mip, &sol.x, max_tries, seed))?;
        *out = Box::into_raw(Box::new(LllMipResult(r)));
        Ok(())
    })
}

/// Max row load of the best selection; NaN for NULL.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lll_mip_result_value(r: *const LllMipResult) -> f64 {
    unsafe { r.as_ref() }.map_or(f64::NAN, |r| r.0.best_value)
}

/// Load target y* + k; NaN for NULL.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lll_mip_result_target(r: *const LllMipResult) -> f64 {
    unsafe { r.as_ref() }.map_or(f64::NAN, |r| r.0.target.target)
}

/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lll_mip_result_trials_used(r: *const LllMipResult) -> usize {
    unsafe { r.as_ref() }.map_or(0, |r| r.0.trials_used)
}

/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lll_mip_result_success(r: *const LllMipResult) -> bool {
    unsafe { r.as_ref() }.is_some_and(|r| r.0.success)
}

/// Chosen slot per group.
///
/// # Safety
/// `r` live; `buf` NULL or `len` writable entries; `written` writable.
#[no_mangle]
pub unsafe extern "C" fn lll_mip_result_slots(
    r: *const LllMipResult,
    buf: *mut usize,
    len: usize,
    written: *mut usize,
) -> LllStatus {
    guard(|| {
        let r = unsafe { borrow(r) }?;
        unsafe { copy_out(&r.0.best.slots, buf, len, written) }
    })
}

/// # Safety
/// `r` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lll_mip_result_free(r: *mut LllMipResult) {
    if !r.is_null() {
        // SAFETY: produced by Box::into_raw.
        drop(unsafe { Box::from_raw(r) });
    }
}

fn kernel(out: *mut f64, f: impl FnOnce() -> lllround::Result<f64>) -> LllStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let out = unsafe { out_ptr(out) }?;
        *out = lib(f())?;
        Ok(())
    })
}

/// Chernoff tail G(μ, δ).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lll_chernoff_g(mu: f64, delta: f64, out: *mut f64) -> LllStatus {
    kernel(out, || tail::chernoff_g(mu, delta))
}

/// Smallest grid δ with ⌈μδ⌉·G(μ, δ) ≤ p.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lll_solve_h(mu: f64, p: f64, out: *mut f64) -> LllStatus {
    kernel(out, || tail::solve_h(mu, p))
}

/// (α·e^{1−α})^B.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lll_g_of(min_demand: f64, alpha: f64, out: *mut f64) -> LllStatus {
    kernel(out, || tail::g_of(min_demand, alpha))
}
