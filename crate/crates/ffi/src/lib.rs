//! C ABI over `watch-core`.
//!
//! Objects are opaque handles created by the `_load` and `_run`
//! functions and released with the matching `_free`. Every fallible call
//! returns a [`WatchStatus`]; on failure the message is available from
//! [`watch_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use watch_core::error::ErrorClass;
use watch_core::hettest;
use watch_core::pipeline::{self, RunConfig};
use watch_core::report::FindingsReport;
use watch_core::tabular::{self, AnalysisPlan, Dataset, FeatureMatrix};
use watch_core::WatchError;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WatchStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Data = 4,
    Io = 5,
    Numerical = 6,
    Panic = 7,
}

/// Verbal evidence category, weakest first.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WatchVerbal {
    Low = 0,
    Moderate = 1,
    Noteworthy = 2,
    Strong = 3,
    VeryStrong = 4,
}

impl From<hettest::Verbal> for WatchVerbal {
    fn from(v: hettest::Verbal) -> Self {
        match v {
            hettest::Verbal::Low => WatchVerbal::Low,
            hettest::Verbal::Moderate => WatchVerbal::Moderate,
            hettest::Verbal::Noteworthy => WatchVerbal::Noteworthy,
            hettest::Verbal::Strong => WatchVerbal::Strong,
            hettest::Verbal::VeryStrong => WatchVerbal::VeryStrong,
        }
    }
}

/// Opaque loaded dataset.
pub struct WatchDataset {
    inner: Dataset,
}

/// Opaque findings of an `analyze` run.
pub struct WatchFindings {
    inner: FindingsReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: WatchStatus, msg: impl Into<String>) -> WatchStatus {
    set_error(msg.into());
    status
}

fn from_error(e: WatchError) -> WatchStatus {
    let status = match e.class() {
        ErrorClass::Config => WatchStatus::Config,
        ErrorClass::Data => WatchStatus::Data,
        ErrorClass::Io => WatchStatus::Io,
        ErrorClass::Numerical => WatchStatus::Numerical,
    };
    fail(status, e.to_string())
}

/// Run `f`, turning panics into `Panic` and errors into status codes.
fn guard(f: impl FnOnce() -> Result<(), WatchStatus>) -> WatchStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WatchStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(WatchStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, WatchStatus> {
    if p.is_null() {
        return Err(fail(WatchStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(WatchStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn core<T>(r: Result<T, WatchError>) -> Result<T, WatchStatus> {
    r.map_err(from_error)
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn watch_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Free a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn watch_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Load a CSV with roles bound from an analysis-plan JSON string.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn watch_dataset_load(
    csv_path: *const c_char,
    plan_json: *const c_char,
    out: *mut *mut WatchDataset,
) -> WatchStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(WatchStatus::NullArgument, "out is null"));
        }
        let path = str_arg(csv_path, "csv_path")?;
        let plan = core(AnalysisPlan::from_json_str(str_arg(plan_json, "plan_json")?))?;
        let ds = core(tabular::load_csv(Path::new(path), &plan))?;
        *out = Box::into_raw(Box::new(WatchDataset { inner: ds }));
        Ok(())
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn watch_dataset_n_rows(ds: *const WatchDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_rows())
}

/// Number of covariates, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn watch_dataset_n_covariates(ds: *const WatchDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.roles.covariates.len())
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn watch_dataset_free(ds: *mut WatchDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Global homogeneity test on the dataset's covariates against supplied
/// pseudo-outcomes (`n_rows` values).
///
/// # Safety
/// `phi` must point to `n` doubles; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn watch_global_test(
    ds: *const WatchDataset,
    phi: *const f64,
    n: usize,
    n_permutations: usize,
    seed: u64,
    out_p_value: *mut f64,
    out_verbal: *mut WatchVerbal,
) -> WatchStatus {
    guard(|| {
        let Some(ds) = ds.as_ref() else {
            return Err(fail(WatchStatus::NullArgument, "dataset is null"));
        };
        if phi.is_null() || out_p_value.is_null() || out_verbal.is_null() {
            return Err(fail(WatchStatus::NullArgument, "phi or output pointer is null"));
        }
        if n != ds.inner.n_rows() {
            return Err(fail(WatchStatus::Data, "phi length differs from the number of rows"));
        }
        let phi = std::slice::from_raw_parts(phi, n);
        let x = core(ds.inner.features())?;
        let r = core(hettest::global_test(&x, phi, n_permutations, seed))?;
        *out_p_value = r.p_value;
        *out_verbal = r.verbal.into();
        Ok(())
    })
}

/// Global test on a dense column-major `n x p` matrix of continuous
/// covariates.
///
/// # Safety
/// `x` must point to `n * p` doubles and `phi` to `n`; output pointers must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn watch_global_test_dense(
    x: *const f64,
    n: usize,
    p: usize,
    phi: *const f64,
    n_permutations: usize,
    seed: u64,
    out_p_value: *mut f64,
    out_statistic: *mut f64,
) -> WatchStatus {
    guard(|| {
        if x.is_null() || phi.is_null() || out_p_value.is_null() || out_statistic.is_null() {
            return Err(fail(WatchStatus::NullArgument, "null pointer argument"));
        }
        let xs = std::slice::from_raw_parts(x, n * p);
        let cols: Vec<Vec<f64>> = xs.chunks(n.max(1)).take(p).map(|c| c.to_vec()).collect();
        let fm = FeatureMatrix::from_columns(cols);
        let r = core(hettest::global_test(&fm, std::slice::from_raw_parts(phi, n), n_permutations, seed))?;
        *out_p_value = r.p_value;
        *out_statistic = r.statistic;
        Ok(())
    })
}

/// Verbal category for a p-value in (0, 1].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn watch_verbal_category(p_value: f64, out: *mut WatchVerbal) -> WatchStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(WatchStatus::NullArgument, "out is null"));
        }
        *out = core(hettest::verbal_category(p_value))?.into();
        Ok(())
    })
}

/// Run `analyze` for a config file, writing outputs to `out_dir`.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn watch_analyze_run(
    config_path: *const c_char,
    out_dir: *const c_char,
    out: *mut *mut WatchFindings,
) -> WatchStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(WatchStatus::NullArgument, "out is null"));
        }
        let cfg = core(RunConfig::from_file(Path::new(str_arg(config_path, "config_path")?)))?;
        let dir = str_arg(out_dir, "out_dir")?;
        let r = core(pipeline::run_analyze(&cfg, Path::new(dir)))?;
        *out = Box::into_raw(Box::new(WatchFindings { inner: r }));
        Ok(())
    })
}

/// Global p-value of a findings handle, NaN for null.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn watch_findings_p_value(f: *const WatchFindings) -> f64 {
    f.as_ref().map_or(f64::NAN, |f| f.inner.het_test.p_value)
}

/// Findings as JSON; free with `watch_string_free`. Null on failure.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn watch_findings_json(f: *const WatchFindings) -> *mut c_char {
    let Some(f) = f.as_ref() else {
        set_error("findings handle is null".into());
        return ptr::null_mut();
    };
    match serde_json::to_string(&f.inner) {
        Ok(s) => CString::new(s).map_or(ptr::null_mut(), CString::into_raw),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `f` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn watch_findings_free(f: *mut WatchFindings) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Generate a synthetic trial from a scenario JSON string into `out_dir`.
///
/// # Safety
/// String arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn watch_simulate(scenario_json: *const c_char, out_dir: *const c_char) -> WatchStatus {
    guard(|| {
        let spec = serde_json::from_str(str_arg(scenario_json, "scenario_json")?)
            .map_err(|e| fail(WatchStatus::Config, e.to_string()))?;
        let dir = str_arg(out_dir, "out_dir")?;
        core(pipeline::run_simulate(&spec, Path::new(dir)))
    })
}
