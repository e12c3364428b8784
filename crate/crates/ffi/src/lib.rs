//! C ABI over the simulator.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every function returns a [`BsStatus`]; on
//! failure a message is available from [`bs_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use beamsched::allocation::{allocate_alg1, waterfill, DispositionTable, InterferencePower};
use beamsched::channel::SubcarrierGains;
use beamsched::config::{ResolvedConfig, SimConfig};
use beamsched::sim::{self, Summary, TraceLog};
use beamsched::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    SearchSpace = 4,
    Contract = 5,
    Io = 6,
    /// Output buffer too small; the required length was written back.
    BufferTooSmall = 7,
    OutOfRange = 8,
    Panic = 9,
}

/// Simulation configuration.
pub struct BsConfig {
    inner: SimConfig,
}

/// Result of one simulation run.
pub struct BsRun {
    resolved: ResolvedConfig,
    log: TraceLog,
    summary: Summary,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).expect("nul bytes removed"));
}

fn fail(status: BsStatus, msg: impl Into<String>) -> BsStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> BsStatus {
    let status = match e {
        Error::Config(_) | Error::Undefined(_) => BsStatus::Config,
        Error::SearchSpace { .. } => BsStatus::SearchSpace,
        Error::Contract(_) => BsStatus::Contract,
        Error::Io { .. } => BsStatus::Io,
        Error::Sweep { source, .. } => return from_error(source),
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> BsStatus) -> BsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(BsStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, BsStatus> {
    if p.is_null() {
        return Err(fail(BsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(BsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

macro_rules! non_null {
    ($p:expr, $what:expr) => {
        if $p.is_null() {
            return fail(BsStatus::NullPointer, concat!($what, " is null"));
        }
    };
}

/// Message of the last failure on this thread, empty if none. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a configuration with every default.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn bs_config_new(out: *mut *mut BsConfig) -> BsStatus {
    guard(|| {
        non_null!(out, "out");
        *out = Box::into_raw(Box::new(BsConfig {
            inner: SimConfig::default(),
        }));
        BsStatus::Ok
    })
}

/// Parses a TOML configuration document.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_config_from_toml(toml: *const c_char, out: *mut *mut BsConfig) -> BsStatus {
    guard(|| {
        non_null!(out, "out");
        let text = try_ffi!(str_arg(toml, "toml"));
        match SimConfig::from_toml_str(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(BsConfig { inner }));
                BsStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Applies one `key=value` override, e.g. `K=8` or `dual.beta0=0.2`.
///
/// # Safety
/// `config` must come from this library; `assignment` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bs_config_set(config: *mut BsConfig, assignment: *const c_char) -> BsStatus {
    guard(|| {
        non_null!(config, "config");
        let assignment = try_ffi!(str_arg(assignment, "assignment"));
        let config = &mut *config;
        match config.inner.with_overrides(&[assignment]) {
            Ok(next) => {
                config.inner = next;
                BsStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Copies the configuration as TOML into `buf`. `len` receives the size
/// needed including the NUL; `buf` may be null to query it.
///
/// # Safety
/// `config` must come from this library; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn bs_config_to_toml(
    config: *const BsConfig,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> BsStatus {
    guard(|| {
        non_null!(config, "config");
        copy_string(&(*config).inner.to_toml_string(), buf, cap, len)
    })
}

/// # Safety
/// `config` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bs_config_free(config: *mut BsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the simulation described by `config`.
///
/// # Safety
/// `config` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_run(config: *const BsConfig, out: *mut *mut BsRun) -> BsStatus {
    guard(|| {
        non_null!(config, "config");
        non_null!(out, "out");
        match sim::run(&(*config).inner) {
            Ok((resolved, log)) => {
                let summary = Summary::new(&resolved, &log);
                *out = Box::into_raw(Box::new(BsRun { resolved, log, summary }));
                BsStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `run` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bs_run_free(run: *mut BsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of simulated slots and users.
///
/// # Safety
/// `run` must come from this library; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_run_shape(run: *const BsRun, slots: *mut u64, users: *mut usize) -> BsStatus {
    guard(|| {
        non_null!(run, "run");
        non_null!(slots, "slots");
        non_null!(users, "users");
        *slots = (*run).log.rows.len() as u64;
        *users = (*run).resolved.dims.users;
        BsStatus::Ok
    })
}

/// Mean total power and mean sum rate over all slots.
///
/// # Safety
/// `run` must come from this library; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_run_means(run: *const BsRun, power: *mut f64, sum_rate: *mut f64) -> BsStatus {
    guard(|| {
        non_null!(run, "run");
        non_null!(power, "power");
        non_null!(sum_rate, "sum_rate");
        let c = &(*run).summary.cumulative;
        match (c.mean_power, c.mean_sum_rate) {
            (Some(p), Some(r)) => {
                *power = p;
                *sum_rate = r;
                BsStatus::Ok
            }
            _ => fail(BsStatus::OutOfRange, "the run has no slots"),
        }
    })
}

/// Mean per-user rates over all slots, written to `rates[0..users]`.
///
/// # Safety
/// `run` must come from this library; `rates` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn bs_run_mean_rates(run: *const BsRun, rates: *mut f64, cap: usize) -> BsStatus {
    guard(|| {
        non_null!(run, "run");
        non_null!(rates, "rates");
        let means = &(*run).summary.cumulative.mean_rates;
        if means.is_empty() {
            return fail(BsStatus::OutOfRange, "the run has no slots");
        }
        if cap < means.len() {
            return fail(BsStatus::BufferTooSmall, format!("need {} entries", means.len()));
        }
        ptr::copy_nonoverlapping(means.as_ptr(), rates, means.len());
        BsStatus::Ok
    })
}

/// Dual price, instantaneous power and sum rate of slot `n`.
///
/// # Safety
/// `run` must come from this library; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_run_slot(
    run: *const BsRun,
    n: u64,
    lambda: *mut f64,
    power: *mut f64,
    sum_rate: *mut f64,
) -> BsStatus {
    guard(|| {
        non_null!(run, "run");
        non_null!(lambda, "lambda");
        non_null!(power, "power");
        non_null!(sum_rate, "sum_rate");
        let rows = &(*run).log.rows;
        let Some(row) = usize::try_from(n).ok().and_then(|i| rows.get(i)) else {
            return fail(BsStatus::OutOfRange, format!("slot {n} out of range 0..{}", rows.len()));
        };
        *lambda = row.lambda;
        *power = row.p_inst;
        *sum_rate = row.sum_rate;
        BsStatus::Ok
    })
}

/// Copies the JSON summary into `buf`; see [`bs_config_to_toml`] for the
/// buffer protocol.
///
/// # Safety
/// `run` must come from this library; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn bs_run_summary_json(
    run: *const BsRun,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> BsStatus {
    guard(|| {
        non_null!(run, "run");
        copy_string(&(*run).summary.to_json(), buf, cap, len)
    })
}

/// Writes `trace.csv` and `summary.json` into `dir`.
///
/// # Safety
/// `run` must come from this library; `dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bs_run_write(run: *const BsRun, dir: *const c_char) -> BsStatus {
    guard(|| {
        non_null!(run, "run");
        let dir = try_ffi!(str_arg(dir, "dir"));
        let r = &*run;
        match sim::write_outputs(Path::new(dir), &r.log, &r.summary) {
            Ok(()) => BsStatus::Ok,
            Err(e) => from_error(&e),
        }
    })
}

/// Greedy beam/user selection on one subcarrier.
///
/// `gains` is row-major `users × beams`; `assigned[q]` receives the user of
/// beam `q` or -1 when the beam is off.
///
/// # Safety
/// `gains` must hold `users * beams` doubles, `mu` `users` doubles,
/// `assigned` `beams` entries; `metric` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_select_beams(
    gains: *const f64,
    users: usize,
    beams: usize,
    mu: *const f64,
    v: f64,
    assigned: *mut i64,
    metric: *mut f64,
) -> BsStatus {
    guard(|| {
        non_null!(gains, "gains");
        non_null!(mu, "mu");
        non_null!(assigned, "assigned");
        non_null!(metric, "metric");
        if beams == 0 || beams > 16 {
            return fail(BsStatus::OutOfRange, format!("beams must lie in 1..=16, got {beams}"));
        }
        let Some(n) = users.checked_mul(beams) else {
            return fail(BsStatus::OutOfRange, "users * beams overflows");
        };
        let v = match InterferencePower::new(v) {
            Ok(v) => v,
            Err(e) => return from_error(&e),
        };
        let c = std::slice::from_raw_parts(gains, n);
        let mu = std::slice::from_raw_parts(mu, users);
        let d = allocate_alg1(SubcarrierGains::new(users, beams, c), mu, v, &DispositionTable::new(beams));
        for (q, u) in d.users.iter().enumerate() {
            *assigned.add(q) = u.map_or(-1, |k| k as i64);
        }
        *metric = d.metric;
        BsStatus::Ok
    })
}

/// Water-filling powers for a given assignment (as produced by
/// [`bs_select_beams`]), written to `powers[0..beams]`.
///
/// # Safety
/// Same buffer sizes as [`bs_select_beams`]; `powers` must hold `beams` doubles.
#[no_mangle]
pub unsafe extern "C" fn bs_waterfill(
    gains: *const f64,
    users: usize,
    beams: usize,
    assigned: *const i64,
    mu: *const f64,
    lambda: f64,
    v: f64,
    powers: *mut f64,
) -> BsStatus {
    guard(|| {
        non_null!(gains, "gains");
        non_null!(assigned, "assigned");
        non_null!(mu, "mu");
        non_null!(powers, "powers");
        let Some(n) = users.checked_mul(beams) else {
            return fail(BsStatus::OutOfRange, "users * beams overflows");
        };
        let v = match InterferencePower::new(v) {
            Ok(v) => v,
            Err(e) => return from_error(&e),
        };
        let c = std::slice::from_raw_parts(gains, n);
        let mu = std::slice::from_raw_parts(mu, users);
        let row: Vec<Option<usize>> = std::slice::from_raw_parts(assigned, beams)
            .iter()
            .map(|&k| usize::try_from(k).ok())
            .collect();
        match waterfill(SubcarrierGains::new(users, beams, c), &row, mu, lambda, v) {
            Ok(p) => {
                ptr::copy_nonoverlapping(p.as_ptr(), powers, beams);
                BsStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

unsafe fn copy_string(s: &str, buf: *mut c_char, cap: usize, len: *mut usize) -> BsStatus {
    let needed = s.len() + 1;
    if !len.is_null() {
        *len = needed;
    }
    if buf.is_null() {
        return if cap == 0 { BsStatus::Ok } else { fail(BsStatus::NullPointer, "buf is null") };
    }
    if cap < needed {
        return fail(BsStatus::BufferTooSmall, format!("need {needed} bytes"));
    }
    ptr::copy_nonoverlapping(s.as_ptr().cast::<c_char>(), buf, s.len());
    *buf.add(s.len()) = 0;
    BsStatus::Ok
}
