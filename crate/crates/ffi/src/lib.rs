//! C ABI surface over the vialab core: parse an experiment config from JSON,
//! run it, and get the full report back as a JSON string.
//!
//! Conventions: every fallible call returns a [`VialabStatus`] and reports
//! details through `vialab_last_error`. Strings returned through out-params
//! are owned by the caller and must be released with `vialab_string_free`;
//! config handles with `vialab_config_free`. Handles are not thread-safe.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use vialab::harness::{run_experiment, ExperimentConfig};

/// Result of a vialab call. Anything other than `OK` leaves a message in
/// `vialab_last_error`.
#[repr(C)]
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum VialabStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An input string was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The config failed to parse or validate.
    InvalidConfig = 3,
    /// The experiment started but did not finish.
    RunFailed = 4,
    /// An internal invariant broke; the handle is still safe to free.
    Panic = 5,
}

/// Opaque handle to a parsed and validated experiment configuration.
pub struct VialabConfig(ExperimentConfig);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let cstring = CString::new(msg)
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string. Do not free.
#[no_mangle]
pub extern "C" fn vialab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy of the message for the most recent failure on this thread, or null
/// if the last call succeeded. Free with `vialab_string_free`.
#[no_mangle]
pub extern "C" fn vialab_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Parse an experiment config from a JSON string into a new handle.
///
/// On success writes the handle through `out` and returns `OK`; on failure
/// leaves `out` untouched.
///
/// # Safety
///
/// `json` must point to a NUL-terminated string and `out` to writable
/// memory for one pointer; both stay borrowed only for the call.
#[no_mangle]
pub unsafe extern "C" fn vialab_config_parse(
    json: *const c_char,
    out: *mut *mut VialabConfig,
) -> VialabStatus {
    clear_error();
    if json.is_null() || out.is_null() {
        set_error("config_parse: null argument".into());
        return VialabStatus::NullPointer;
    }
    let text = match CStr::from_ptr(json).to_str() {
        Ok(t) => t,
        Err(e) => {
            set_error(format!("config_parse: {e}"));
            return VialabStatus::InvalidUtf8;
        }
    };
    match ExperimentConfig::from_json(text) {
        Ok(config) => {
            *out = Box::into_raw(Box::new(VialabConfig(config)));
            VialabStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            VialabStatus::InvalidConfig
        }
    }
}

/// Release a config handle. Null is a no-op.
///
/// # Safety
///
/// `config` must be null or a handle from `vialab_config_parse` that has
/// not been freed before.
#[no_mangle]
pub unsafe extern "C" fn vialab_config_free(config: *mut VialabConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Run the experiment described by `config` and return the report as a
/// JSON string through `out_json`. Free the string with
/// `vialab_string_free`. The config handle stays valid and reusable.
///
/// # Safety
///
/// `config` must be a live handle from `vialab_config_parse` and
/// `out_json` must point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn vialab_experiment_run(
    config: *const VialabConfig,
    out_json: *mut *mut c_char,
) -> VialabStatus {
    clear_error();
    if config.is_null() || out_json.is_null() {
        set_error("experiment_run: null argument".into());
        return VialabStatus::NullPointer;
    }
    let config = &(*config).0;
    let outcome = catch_unwind(AssertUnwindSafe(|| run_experiment(config)));
    let report = match outcome {
        Ok(Ok(report)) => report,
        Ok(Err(e)) => {
            set_error(e.to_string());
            return VialabStatus::RunFailed;
        }
        Err(_) => {
            set_error("experiment_run: internal panic".into());
            return VialabStatus::Panic;
        }
    };
    let json = match serde_json::to_string_pretty(&report) {
        Ok(j) => j,
        Err(e) => {
            set_error(format!("experiment_run: serialize: {e}"));
            return VialabStatus::RunFailed;
        }
    };
    match CString::new(json) {
        Ok(cstring) => {
            *out_json = cstring.into_raw();
            VialabStatus::Ok
        }
        Err(e) => {
            set_error(format!("experiment_run: {e}"));
            VialabStatus::RunFailed
        }
    }
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
///
/// `s` must be null or a string obtained from this library that has not
/// been freed before.
#[no_mangle]
pub unsafe extern "C" fn vialab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
