//! C ABI over `ipp-core`.
//!
//! Handles are opaque pointers created by `ipp_config_load`,
//! `ipp_config_parse`, `ipp_batch_run` and `ipp_gp_fit`, and released with the
//! matching `ipp_*_free`. Every fallible call returns an [`IppStatus`]; on
//! failure, [`ipp_last_error_message`] copies a description of the most recent
//! error on the calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ipp_core::harness::{parse_config, parse_config_str, run_batch_with, write_report, BatchResult, ExperimentConfig};
use ipp_core::{Error, GpModel, KernelParams, Location, Method, Observation};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IppStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IppMethod {
    Rmcts = 0,
    Mcts = 1,
    Ncmcts = 2,
}

impl From<IppMethod> for Method {
    fn from(m: IppMethod) -> Self {
        match m {
            IppMethod::Rmcts => Method::Rmcts,
            IppMethod::Mcts => Method::Mcts,
            IppMethod::Ncmcts => Method::Ncmcts,
        }
    }
}

impl From<Method> for IppMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Rmcts => IppMethod::Rmcts,
            Method::Mcts => IppMethod::Mcts,
            Method::Ncmcts => IppMethod::Ncmcts,
        }
    }
}

/// Parsed experiment configuration.
pub struct IppConfig {
    inner: ExperimentConfig,
}

/// Finished batch of missions for one method.
pub struct IppBatch {
    config: ExperimentConfig,
    inner: BatchResult,
}

/// Fitted Gaussian-process posterior.
pub struct IppGp {
    inner: GpModel,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: IppStatus, msg: impl Into<String>) -> IppStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> IppStatus {
    let status = if e.is_config_error() {
        IppStatus::Config
    } else {
        match e {
            Error::Io { .. } => IppStatus::Io,
            Error::Domain(_) => IppStatus::OutOfRange,
            _ => IppStatus::Numerical,
        }
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> IppStatus) -> IppStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(IppStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, IppStatus> {
    if p.is_null() {
        return Err(fail(IppStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(IppStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))
}

macro_rules! deref {
    ($p:expr, $name:literal) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(IppStatus::NullPointer, concat!("`", $name, "` is null")),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr, $name:literal) => {
        match $p.as_mut() {
            Some(v) => v,
            None => return fail(IppStatus::NullPointer, concat!("`", $name, "` is null")),
        }
    };
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL.
#[no_mangle]
pub extern "C" fn ipp_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message into `buf` as a NUL-terminated string,
/// truncating to `len - 1` bytes. Returns the number of bytes written,
/// excluding the NUL.
#[no_mangle]
pub unsafe extern "C" fn ipp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let n = msg.len().min(len - 1);
        ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
        *buf.add(n) = 0;
        n
    })
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn ipp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads and validates a JSON config file.
#[no_mangle]
pub unsafe extern "C" fn ipp_config_load(path: *const c_char, out: *mut *mut IppConfig) -> IppStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        *out = ptr::null_mut();
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match parse_config(path) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(IppConfig { inner }));
                IppStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Parses a JSON config from a string. Relative raster paths resolve
/// against `base_dir`, or the working directory when it is null.
#[no_mangle]
pub unsafe extern "C" fn ipp_config_parse(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut IppConfig,
) -> IppStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        *out = ptr::null_mut();
        let json = match str_arg(json, "json") {
            Ok(j) => j,
            Err(s) => return s,
        };
        let base = if base_dir.is_null() {
            None
        } else {
            match str_arg(base_dir, "base_dir") {
                Ok(b) => Some(Path::new(b)),
                Err(s) => return s,
            }
        };
        match parse_config_str(json, base) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(IppConfig { inner }));
                IppStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ipp_config_free(config: *mut IppConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ipp_config_set_runs(config: *mut IppConfig, runs: usize) -> IppStatus {
    let config = deref_mut!(config, "config");
    if runs == 0 {
        return fail(IppStatus::InvalidArgument, "runs must be >= 1");
    }
    config.inner.runs = runs;
    IppStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn ipp_config_set_base_seed(config: *mut IppConfig, seed: u64) -> IppStatus {
    let config = deref_mut!(config, "config");
    config.inner.base_seed = seed;
    IppStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn ipp_config_set_iterations(config: *mut IppConfig, iterations: usize) -> IppStatus {
    let config = deref_mut!(config, "config");
    if iterations == 0 {
        return fail(IppStatus::InvalidArgument, "iterations must be >= 1");
    }
    config.inner.planner.iterations = iterations;
    IppStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn ipp_config_method(config: *const IppConfig, out: *mut IppMethod) -> IppStatus {
    let config = deref!(config, "config");
    let out = deref_mut!(out, "out");
    *out = config.inner.method.into();
    IppStatus::Ok
}

/// Runs `runs` seeded missions with `method`.
#[no_mangle]
pub unsafe extern "C" fn ipp_batch_run(
    config: *const IppConfig,
    method: IppMethod,
    out: *mut *mut IppBatch,
) -> IppStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        *out = ptr::null_mut();
        let config = deref!(config, "config");
        match run_batch_with(&config.inner, method.into()) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(IppBatch {
                    config: config.inner.clone(),
                    inner,
                }));
                IppStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ipp_batch_free(batch: *mut IppBatch) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ipp_batch_mean_mse(batch: *const IppBatch, out: *mut f64) -> IppStatus {
    let batch = deref!(batch, "batch");
    let out = deref_mut!(out, "out");
    *out = batch.inner.row.mean_mse;
    IppStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn ipp_batch_mean_remaining_budget(batch: *const IppBatch, out: *mut f64) -> IppStatus {
    let batch = deref!(batch, "batch");
    let out = deref_mut!(out, "out");
    *out = batch.inner.row.mean_remaining_budget;
    IppStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn ipp_batch_stranded(batch: *const IppBatch, out: *mut usize) -> IppStatus {
    let batch = deref!(batch, "batch");
    let out = deref_mut!(out, "out");
    *out = batch.inner.row.stranded;
    IppStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn ipp_batch_mission_count(batch: *const IppBatch, out: *mut usize) -> IppStatus {
    let batch = deref!(batch, "batch");
    let out = deref_mut!(out, "out");
    *out = batch.inner.missions.len();
    IppStatus::Ok
}

/// MSE and seed of mission `index`.
#[no_mangle]
pub unsafe extern "C" fn ipp_batch_mission(
    batch: *const IppBatch,
    index: usize,
    mse: *mut f64,
    seed: *mut u64,
) -> IppStatus {
    let batch = deref!(batch, "batch");
    let mse = deref_mut!(mse, "mse");
    let seed = deref_mut!(seed, "seed");
    match batch.inner.missions.get(index) {
        Some(m) => {
            *mse = m.mse;
            *seed = m.seed;
            IppStatus::Ok
        }
        None => fail(
            IppStatus::OutOfRange,
            format!("mission {index} out of range ({} missions)", batch.inner.missions.len()),
        ),
    }
}

/// Writes `metrics.json`, `timing.json` and per-mission artifacts to `outdir`.
#[no_mangle]
pub unsafe extern "C" fn ipp_batch_write_report(batch: *const IppBatch, outdir: *const c_char) -> IppStatus {
    guard(|| {
        let batch = deref!(batch, "batch");
        let outdir = match str_arg(outdir, "outdir") {
            Ok(d) => d,
            Err(s) => return s,
        };
        match write_report(&batch.config, std::slice::from_ref(&batch.inner), Path::new(outdir)) {
            Ok(()) => IppStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Fits a GP to `n` noise-free observations at `(xs[i], ys[i])`.
#[no_mangle]
pub unsafe extern "C" fn ipp_gp_fit(
    xs: *const u32,
    ys: *const u32,
    values: *const f64,
    n: usize,
    length_scale: f64,
    signal_variance: f64,
    jitter: f64,
    out: *mut *mut IppGp,
) -> IppStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        *out = ptr::null_mut();
        if n > 0 && (xs.is_null() || ys.is_null() || values.is_null()) {
            return fail(IppStatus::NullPointer, "observation arrays are null");
        }
        let obs: Vec<Observation> = (0..n)
            .map(|i| Observation::new(Location::new(*xs.add(i), *ys.add(i)), *values.add(i)))
            .collect();
        let params = KernelParams {
            length_scale,
            signal_variance,
            jitter,
        };
        match GpModel::fit(obs, params) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(IppGp { inner }));
                IppStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ipp_gp_free(gp: *mut IppGp) {
    if !gp.is_null() {
        drop(Box::from_raw(gp));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ipp_gp_predict(
    gp: *const IppGp,
    x: u32,
    y: u32,
    mean: *mut f64,
    variance: *mut f64,
) -> IppStatus {
    let gp = deref!(gp, "gp");
    let mean = deref_mut!(mean, "mean");
    let variance = deref_mut!(variance, "variance");
    let p = gp.inner.predict_one(Location::new(x, y));
    *mean = p.mean;
    *variance = p.variance;
    IppStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn ipp_gp_len(gp: *const IppGp, out: *mut usize) -> IppStatus {
    let gp = deref!(gp, "gp");
    let out = deref_mut!(out, "out");
    *out = gp.inner.len();
    IppStatus::Ok
}
