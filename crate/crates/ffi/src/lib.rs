//! C ABI over the `coldjc` simulator.
//!
//! Objects cross the boundary as opaque handles created by `cj_config_from_*` and `cj_simulate`
//! and released with the matching `cj_*_free`. Every fallible call returns a
//! [`CjStatus`]; the message of the most recent failure on the calling thread is
//! available from [`cj_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use coldjc::config::{Method, RunConfig};
use coldjc::observables::{self, Direction, Quantity, TimeSeriesRecord, UnitSystem};
use coldjc::runner::{self, CaseSeries};
use coldjc::Error;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CjStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Validation = 3,
    Unsupported = 4,
    Numerical = 5,
    Io = 6,
    /// The run completed but a tolerance check failed.
    VerificationFailed = 7,
    OutOfRange = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CjMethod {
    Oracle = 0,
    Decomposed = 1,
    Analytic = 2,
    /// Whatever the configuration selects.
    FromConfig = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CjQuantity {
    Length = 0,
    Momentum = 1,
    Time = 2,
    Temperature = 3,
}

/// One emitted row; mirrors the CSV columns.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CjRecord {
    pub t: f64,
    pub sigma_z: f64,
    pub z_mean: f64,
    pub p_mean: f64,
    pub field_n_mean: f64,
    pub norm: f64,
}

impl From<&TimeSeriesRecord> for CjRecord {
    fn from(r: &TimeSeriesRecord) -> Self {
        CjRecord {
            t: r.t,
            sigma_z: r.sigma_z,
            z_mean: r.z_mean,
            p_mean: r.p_mean,
            field_n_mean: r.field_n_mean,
            norm: r.norm,
        }
    }
}

/// Parsed and validated run configuration.
pub struct CjConfig {
    inner: RunConfig,
}

/// Evolved time series for every case of a configuration.
pub struct CjSimulation {
    cases: Vec<CaseSeries>,
    labels: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).expect("nul bytes removed"));
}

fn status_for(e: &Error) -> CjStatus {
    match e {
        Error::Unsupported(_) => CjStatus::Unsupported,
        Error::Eigen(_)
        | Error::NotHermitian { .. }
        | Error::NotNilpotent { .. }
        | Error::Domain { .. } => CjStatus::Numerical,
        Error::Io { .. } => CjStatus::Io,
        Error::OutOfRange { .. } => CjStatus::OutOfRange,
        _ => CjStatus::Validation,
    }
}

fn fail(e: Error) -> CjStatus {
    let status = status_for(&e);
    set_error(e.to_string());
    status
}

fn guard(f: impl FnOnce() -> CjStatus) -> CjStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            CjStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, CjStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(CjStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        CjStatus::InvalidUtf8
    })
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($p:expr, $what:literal) => {
        if $p.is_null() {
            set_error(concat!($what, " is null"));
            return CjStatus::NullPointer;
        }
    };
}

/// Message describing the most recent failure on this thread; empty if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cj_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cj_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a JSON configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cj_config_from_json(
    json: *const c_char,
    out: *mut *mut CjConfig,
) -> CjStatus {
    guard(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        let text = try_status!(str_arg(json, "json"));
        match RunConfig::from_json(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(CjConfig { inner }));
                CjStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Reads and parses a JSON configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cj_config_from_file(
    path: *const c_char,
    out: *mut *mut CjConfig,
) -> CjStatus {
    guard(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        let path = try_status!(str_arg(path, "path"));
        match RunConfig::from_path(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(CjConfig { inner }));
                CjStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `config` must come from `cj_config_from_*` and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cj_config_free(config: *mut CjConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Total dimension `2 · n_cm · n_field` of the configured space.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cj_config_dimension(config: *const CjConfig, out: *mut usize) -> CjStatus {
    guard(|| {
        non_null!(config, "config");
        non_null!(out, "out");
        match (&*config).inner.dims() {
            Ok(d) => {
                *out = d.total();
                CjStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

fn methods_for(cfg: &RunConfig, method: CjMethod) -> Result<Vec<Method>, CjStatus> {
    let m = match method {
        CjMethod::Oracle => Method::Oracle,
        CjMethod::Decomposed => Method::Decomposed,
        CjMethod::Analytic => Method::Analytic,
        CjMethod::FromConfig => return Ok(cfg.methods()),
    };
    if m == Method::Analytic && !cfg.analytic_applicable() {
        set_error("analytic requires delta = 0 and quadratic couplings");
        return Err(CjStatus::Unsupported);
    }
    Ok(vec![m])
}

/// Evolves every case of `config` in memory.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cj_simulate(
    config: *const CjConfig,
    method: CjMethod,
    out: *mut *mut CjSimulation,
) -> CjStatus {
    guard(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        non_null!(config, "config");
        let cfg = &(&*config).inner;
        let methods = try_status!(methods_for(cfg, method));
        match runner::simulate_cases(cfg, &methods) {
            Ok(cases) => {
                let labels = cases
                    .iter()
                    .map(|c| CString::new(c.case.label.clone()).unwrap_or_default())
                    .collect();
                *out = Box::into_raw(Box::new(CjSimulation { cases, labels }));
                CjStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `sim` must come from `cj_simulate` and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cj_simulation_free(sim: *mut CjSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Number of (coupling, initial state) cases.
///
/// # Safety
/// `sim` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cj_simulation_case_count(sim: *const CjSimulation) -> usize {
    if sim.is_null() {
        0
    } else {
        (&*sim).cases.len()
    }
}

/// Label of case `index`, owned by the handle; null when out of range.
///
/// # Safety
/// `sim` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cj_simulation_case_label(
    sim: *const CjSimulation,
    index: usize,
) -> *const c_char {
    if sim.is_null() {
        return ptr::null();
    }
    (&*sim)
        .labels
        .get(index)
        .map_or(ptr::null(), |l| l.as_ptr())
}

/// Number of methods evaluated per case.
///
/// # Safety
/// `sim` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cj_simulation_method_count(sim: *const CjSimulation) -> usize {
    if sim.is_null() {
        return 0;
    }
    (&*sim).cases.first().map_or(0, |c| c.series.len())
}

/// Copies the series of case `case` and method slot `method_index` into `rows`.
///
/// `*len` receives the number of rows. With `rows` null or `capacity` too small
/// nothing is copied and `BufferTooSmall` is returned (or `Ok` for a null probe).
///
/// # Safety
/// `sim` must be a live handle, `len` valid, and `rows` valid for `capacity` records if non-null.
#[no_mangle]
pub unsafe extern "C" fn cj_simulation_series(
    sim: *const CjSimulation,
    case: usize,
    method_index: usize,
    rows: *mut CjRecord,
    capacity: usize,
    len: *mut usize,
) -> CjStatus {
    guard(|| {
        non_null!(sim, "sim");
        non_null!(len, "len");
        let sim = &*sim;
        let Some(cs) = sim.cases.get(case) else {
            set_error(format!(
                "case {case} out of range ({} cases)",
                sim.cases.len()
            ));
            return CjStatus::OutOfRange;
        };
        let Some(series) = cs.series.get(method_index) else {
            set_error(format!(
                "method index {method_index} out of range ({} methods)",
                cs.series.len()
            ));
            return CjStatus::OutOfRange;
        };
        *len = series.records.len();
        if rows.is_null() {
            return CjStatus::Ok;
        }
        if capacity < series.records.len() {
            set_error(format!(
                "buffer holds {capacity} rows, need {}",
                series.records.len()
            ));
            return CjStatus::BufferTooSmall;
        }
        let dst = std::slice::from_raw_parts_mut(rows, series.records.len());
        for (d, r) in dst.iter_mut().zip(&series.records) {
            *d = CjRecord::from(r);
        }
        CjStatus::Ok
    })
}

/// Runs the configuration and writes all output files into `out_dir`.
/// Returns `VerificationFailed` when a norm or cross-method tolerance is exceeded.
///
/// # Safety
/// `config` must be a live handle and `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cj_run(config: *const CjConfig, out_dir: *const c_char) -> CjStatus {
    guard(|| {
        non_null!(config, "config");
        let dir = try_status!(str_arg(out_dir, "out_dir"));
        match runner::run(&(&*config).inner, Path::new(dir)) {
            Ok(summary) if summary.failures.is_empty() => CjStatus::Ok,
            Ok(summary) => {
                set_error(summary.failures.join("; "));
                CjStatus::VerificationFailed
            }
            Err(e) => fail(e),
        }
    })
}

/// Runs the invariant suite; `config` may be null for the built-in default.
/// `*failed` receives the number of failing checks.
///
/// # Safety
/// `config` must be a live handle or null; `failed` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cj_verify(config: *const CjConfig, failed: *mut usize) -> CjStatus {
    guard(|| {
        non_null!(failed, "failed");
        let default;
        let cfg = if config.is_null() {
            default = runner::default_verify_config();
            &default
        } else {
            &(&*config).inner
        };
        match runner::verify(cfg) {
            Ok(report) => {
                let bad: Vec<_> = report
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name.clone())
                    .collect();
                *failed = bad.len();
                if bad.is_empty() {
                    CjStatus::Ok
                } else {
                    set_error(format!("failed checks: {}", bad.join(", ")));
                    CjStatus::VerificationFailed
                }
            }
            Err(e) => fail(e),
        }
    })
}

/// `cos(2 g0 √(n+1) t)`.
#[no_mangle]
pub extern "C" fn cj_jc_baseline_inversion(n: usize, g0: f64, t: f64) -> f64 {
    observables::jc_baseline_inversion(n, g0, t)
}

/// Scaled → SI (`to_physical != 0`) or SI → scaled, with the default unit system.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cj_convert_units(
    value: f64,
    quantity: CjQuantity,
    to_physical: i32,
    out: *mut f64,
) -> CjStatus {
    guard(|| {
        non_null!(out, "out");
        let q = match quantity {
            CjQuantity::Length => Quantity::Length,
            CjQuantity::Momentum => Quantity::Momentum,
            CjQuantity::Time => Quantity::Time,
            CjQuantity::Temperature => Quantity::Temperature,
        };
        let dir = if to_physical != 0 {
            Direction::ToPhysical
        } else {
            Direction::ToScaled
        };
        match observables::convert_units(value, q, dir, &UnitSystem::default()) {
            Ok(v) => {
                *out = v;
                CjStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
