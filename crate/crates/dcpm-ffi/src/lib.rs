//! C ABI over the dcpm library.
//!
//! Instances travel as JSON strings and live behind the opaque
//! [`DcpmInstance`] handle; every entry point returns a [`DcpmStatus`] code
//! and writes results through out-pointers. The last error message is kept
//! per thread and can be copied out with [`dcpm_last_error`]. The generated
//! header lands in `include/dcpm.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dcpm::milp::{BipStatus, LpStatus, SolveLimits};
use dcpm::model::{validate_instance, Instance, OnlineParams};
use dcpm::offline::{lp_relaxation, solve_offline};
use dcpm::online::{run_online, OnlineOptions, Policy};

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

/// Result code of every FFI call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum DcpmStatus {
    Ok = 0,
    /// A pointer argument was null.
    NullArgument = 1,
    /// The JSON did not parse into an instance.
    ParseError = 2,
    /// The instance violates a structural invariant.
    InvalidInstance = 3,
    /// The solver failed (numerical breakdown or invalid program).
    SolveError = 4,
    /// The exact solver hit its limits before proving optimality.
    Timeout = 5,
    /// The model is infeasible.
    Infeasible = 6,
    /// The simulation exceeded its safety horizon.
    HorizonExceeded = 7,
}

/// Opaque handle to a validated problem instance.
pub struct DcpmInstance {
    inner: Instance,
}

/// Parses an instance from JSON. On success writes a fresh handle to `out`;
/// the caller owns it and must release it with [`dcpm_instance_free`].
///
/// # Safety
/// `json` must be a valid NUL-terminated C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dcpm_instance_from_json(
    json: *const c_char,
    out: *mut *mut DcpmInstance,
) -> DcpmStatus {
    if json.is_null() || out.is_null() {
        set_error("null argument".into());
        return DcpmStatus::NullArgument;
    }
    let text = match CStr::from_ptr(json).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("instance JSON is not valid UTF-8".into());
            return DcpmStatus::ParseError;
        }
    };
    let instance: Instance = match serde_json::from_str(text) {
        Ok(i) => i,
        Err(e) => {
            set_error(format!("cannot parse instance: {}", e));
            return DcpmStatus::ParseError;
        }
    };
    let violations = validate_instance(&instance);
    if !violations.is_empty() {
        set_error(format!("invalid instance: {}", violations[0]));
        return DcpmStatus::InvalidInstance;
    }
    *out = Box::into_raw(Box::new(DcpmInstance { inner: instance }));
    DcpmStatus::Ok
}

/// Releases a handle returned by [`dcpm_instance_from_json`]. Null is a
/// no-op.
///
/// # Safety
/// `handle` must be null or a pointer previously returned by
/// [`dcpm_instance_from_json`] that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn dcpm_instance_free(handle: *mut DcpmInstance) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Solves the instance exactly. Writes the optimal total energy in joules
/// to `value`. `max_seconds <= 0` and `max_nodes == 0` mean unlimited.
///
/// # Safety
/// `handle` must be a live instance handle and `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dcpm_solve_offline(
    handle: *const DcpmInstance,
    max_seconds: f64,
    max_nodes: u64,
    value: *mut f64,
) -> DcpmStatus {
    if handle.is_null() || value.is_null() {
        set_error("null argument".into());
        return DcpmStatus::NullArgument;
    }
    let instance = &(*handle).inner;
    let limits = SolveLimits {
        max_nodes: (max_nodes > 0).then_some(max_nodes),
        max_seconds: (max_seconds > 0.0).then_some(max_seconds),
    };
    let result = catch_unwind(AssertUnwindSafe(|| solve_offline(instance, limits)));
    match result {
        Ok(Ok(sol)) => match sol.bip.status {
            BipStatus::Optimal => {
                *value = sol.bip.value;
                DcpmStatus::Ok
            }
            BipStatus::Timeout => {
                *value = sol.bip.value;
                set_error(format!(
                    "limits hit with gap {} after {} nodes",
                    sol.bip.proof_gap, sol.bip.nodes_explored
                ));
                DcpmStatus::Timeout
            }
            BipStatus::Infeasible => {
                set_error("instance is infeasible".into());
                DcpmStatus::Infeasible
            }
        },
        Ok(Err(e)) => {
            set_error(e.to_string());
            DcpmStatus::SolveError
        }
        Err(_) => {
            set_error("internal panic".into());
            DcpmStatus::SolveError
        }
    }
}

/// Solves the linear relaxation and writes its value to `value`.
///
/// # Safety
/// `handle` must be a live instance handle and `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dcpm_lp_relaxation(
    handle: *const DcpmInstance,
    value: *mut f64,
) -> DcpmStatus {
    if handle.is_null() || value.is_null() {
        set_error("null argument".into());
        return DcpmStatus::NullArgument;
    }
    let instance = &(*handle).inner;
    match lp_relaxation(instance) {
        Ok(sol) => match sol.status {
            LpStatus::Optimal => {
                *value = sol.value;
                DcpmStatus::Ok
            }
            _ => {
                set_error("relaxation infeasible or unbounded".into());
                DcpmStatus::Infeasible
            }
        },
        Err(e) => {
            set_error(e.to_string());
            DcpmStatus::SolveError
        }
    }
}

/// Runs the online policy. `randomized != 0` substitutes the random
/// permutation assignment. Writes the total energy and the number of jobs
/// finished within their deadline.
///
/// # Safety
/// `handle` must be a live instance handle; `energy` and `deadline_hits`
/// must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dcpm_run_online(
    handle: *const DcpmInstance,
    t_wait: f64,
    n_ja: u32,
    randomized: i32,
    seed: u64,
    energy: *mut f64,
    deadline_hits: *mut u32,
) -> DcpmStatus {
    if handle.is_null() || energy.is_null() || deadline_hits.is_null() {
        set_error("null argument".into());
        return DcpmStatus::NullArgument;
    }
    if t_wait < 0.0 || n_ja < 1 {
        set_error("online params need t_wait >= 0 and n_ja >= 1".into());
        return DcpmStatus::InvalidInstance;
    }
    let instance = &(*handle).inner;
    let params = OnlineParams { t_wait, n_ja };
    let policy = if randomized != 0 { Policy::Random } else { Policy::Hungarian };
    let options = OnlineOptions { wait_all_idle: false, horizon_cap_factor: 100_000 };
    match run_online(instance, &params, policy, seed, &options) {
        Ok(result) => {
            *energy = result.total_energy;
            *deadline_hits = result.jobs_within_deadline;
            DcpmStatus::Ok
        }
        Err(dcpm::online::OnlineError::HorizonExceeded { cap }) => {
            set_error(format!("exceeded safety horizon of {} slots", cap));
            DcpmStatus::HorizonExceeded
        }
        Err(e) => {
            set_error(e.to_string());
            DcpmStatus::InvalidInstance
        }
    }
}

/// Copies the last error message on this thread into `buf` (truncated,
/// always NUL-terminated) and returns its full length in bytes.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes, or be null (then only
/// the length is returned).
#[no_mangle]
pub unsafe extern "C" fn dcpm_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let borrowed = e.borrow();
        let msg = match borrowed.as_ref() {
            Some(m) => m,
            None => return 0,
        };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // Guarantee termination even when truncated.
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}
