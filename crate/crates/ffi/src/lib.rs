//! C interface to the `wfsim` simulator.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `*_new`/`*_from_*` function and released with the matching `*_free`.
//! Fallible calls return a [`WfsimStatus`]; the text of the last failure on
//! the calling thread is available from [`wfsim_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use wfsim::config::RunConfig;
use wfsim::dynamics::{BarModel, FaultSpec};
use wfsim::inductance::{Block, InductanceModel};
use wfsim::pipeline::{self, RunOutcome};
use wfsim::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WfsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    InvalidParameter = 4,
    RotorContact = 5,
    IndexOutOfRange = 6,
    Unsupported = 7,
    Numerical = 8,
    Io = 9,
    Panic = 10,
}

/// Inductance block selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WfsimBlock {
    Ls = 0,
    Lr = 1,
    Lsr = 2,
}

/// Broken-bar representation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WfsimBarModel {
    Scale = 0,
    Eliminate = 1,
}

/// Uniformly sampled trace of a finished run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WfsimSeries {
    Time = 0,
    Ia = 1,
    Ib = 2,
    Ic = 3,
    Omega = 4,
    Torque = 5,
    Theta = 6,
}

/// Run configuration.
pub struct WfsimConfig(RunConfig);

/// Inductance model bound to the eccentricity of a configuration.
pub struct WfsimModel {
    model: InductanceModel,
    eccentricity: wfsim::geometry::EccentricityConfig,
}

/// Result of a simulation.
pub struct WfsimRun(RunOutcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WfsimStatus {
    match e {
        Error::RotorContact(_) | Error::InvalidEccentricity(_) => WfsimStatus::RotorContact,
        Error::IndexOutOfRange { .. } => WfsimStatus::IndexOutOfRange,
        Error::InvalidParameter { .. } => WfsimStatus::InvalidParameter,
        Error::Unsupported(_) => WfsimStatus::Unsupported,
        Error::SingularInductance { .. } | Error::StepUnderflow { .. } | Error::WindowTooShort(_) => {
            WfsimStatus::Numerical
        }
        Error::Config(_) | Error::Json(_) => WfsimStatus::Config,
        Error::Io(_) => WfsimStatus::Io,
    }
}

/// Runs `f`, turning errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), (WfsimStatus, String)>>(f: F) -> WfsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WfsimStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside wfsim".into());
            WfsimStatus::Panic
        }
    }
}

fn lift<T>(r: wfsim::Result<T>) -> Result<T, (WfsimStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (WfsimStatus, String)> {
    p.as_ref().ok_or_else(|| (WfsimStatus::NullPointer, format!("{what} is null")))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (WfsimStatus, String)> {
    p.as_mut().ok_or_else(|| (WfsimStatus::NullPointer, format!("{what} is null")))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (WfsimStatus, String)> {
    if p.is_null() {
        return Err((WfsimStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (WfsimStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wfsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wfsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wfsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Built-in reference configuration.
#[no_mangle]
pub extern "C" fn wfsim_config_reference() -> *mut WfsimConfig {
    Box::into_raw(Box::new(WfsimConfig(RunConfig::reference())))
}

/// Parses TOML overrides of the reference configuration.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wfsim_config_from_toml(text: *const c_char, out: *mut *mut WfsimConfig) -> WfsimStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        *out = ptr::null_mut();
        let cfg = lift(RunConfig::from_toml_over_reference(as_str(text, "text")?))?;
        *out = Box::into_raw(Box::new(WfsimConfig(cfg)));
        Ok(())
    })
}

/// Effective configuration as TOML; free with [`wfsim_string_free`].
///
/// # Safety
/// `cfg` must be a live configuration and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wfsim_config_to_toml(cfg: *const WfsimConfig, out: *mut *mut c_char) -> WfsimStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let cfg = as_ref(cfg, "cfg")?;
        *out = CString::new(cfg.0.to_toml()).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// Sets the static and dynamic eccentricity degrees.
///
/// # Safety
/// `cfg` must be a live configuration.
#[no_mangle]
pub unsafe extern "C" fn wfsim_config_set_eccentricity(cfg: *mut WfsimConfig, delta_s: f64, delta_d: f64) -> WfsimStatus {
    guard(|| {
        let cfg = as_mut(cfg, "cfg")?;
        let mut ecc = cfg.0.fault.eccentricity;
        ecc.delta_s = delta_s;
        ecc.delta_d = delta_d;
        lift(ecc.validate())?;
        cfg.0.fault.eccentricity = ecc;
        Ok(())
    })
}

/// Breaks `count` adjacent bars starting at bar 1.
///
/// # Safety
/// `cfg` must be a live configuration.
#[no_mangle]
pub unsafe extern "C" fn wfsim_config_set_broken_bars(
    cfg: *mut WfsimConfig,
    count: usize,
    model: WfsimBarModel,
) -> WfsimStatus {
    guard(|| {
        let cfg = as_mut(cfg, "cfg")?;
        let model = match model {
            WfsimBarModel::Scale => BarModel::Scale,
            WfsimBarModel::Eliminate => BarModel::Eliminate,
        };
        let fault = FaultSpec {
            eccentricity: cfg.0.fault.eccentricity,
            broken_factor: cfg.0.fault.broken_factor,
            ..FaultSpec::broken(count, model)
        };
        lift(fault.validate(cfg.0.motor.n))?;
        cfg.0.fault = fault;
        Ok(())
    })
}

/// Sets the simulated duration in seconds.
///
/// # Safety
/// `cfg` must be a live configuration.
#[no_mangle]
pub unsafe extern "C" fn wfsim_config_set_duration(cfg: *mut WfsimConfig, t_end: f64) -> WfsimStatus {
    guard(|| {
        let cfg = as_mut(cfg, "cfg")?;
        let mut sim = cfg.0.sim;
        sim.t_end = t_end;
        lift(sim.validate())?;
        cfg.0.sim = sim;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wfsim_config_free(cfg: *mut WfsimConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Builds the inductance model of a configuration.
///
/// # Safety
/// `cfg` must be a live configuration and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wfsim_model_new(cfg: *const WfsimConfig, out: *mut *mut WfsimModel) -> WfsimStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        *out = ptr::null_mut();
        let cfg = &as_ref(cfg, "cfg")?.0;
        let model = lift(cfg.motor.inductance_model(cfg.model.skew, cfg.model.mutual))?;
        *out = Box::into_raw(Box::new(WfsimModel {
            model,
            eccentricity: cfg.fault.eccentricity,
        }));
        Ok(())
    })
}

/// One inductance entry (H) and its θ-derivative (H/rad) at rotor angle
/// `theta`. Indices are 1-based; `derivative` may be null.
///
/// # Safety
/// `model` must be live and `value` valid; `derivative` valid or null.
#[no_mangle]
pub unsafe extern "C" fn wfsim_model_inductance(
    model: *const WfsimModel,
    theta: f64,
    block: WfsimBlock,
    i: usize,
    j: usize,
    value: *mut f64,
    derivative: *mut f64,
) -> WfsimStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        let value = as_mut(value, "value")?;
        let block = match block {
            WfsimBlock::Ls => Block::Ls,
            WfsimBlock::Lr => Block::Lr,
            WfsimBlock::Lsr => Block::Lsr,
        };
        let d = lift(m.model.entry(&m.eccentricity, theta, block, i, j))?;
        *value = d.v;
        if let Some(dd) = derivative.as_mut() {
            *dd = d.d;
        }
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wfsim_model_free(model: *mut WfsimModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Simulates a configuration and analyses its steady state. Blocks until
/// the run finishes.
///
/// # Safety
/// `cfg` must be a live configuration and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wfsim_run(cfg: *const WfsimConfig, out: *mut *mut WfsimRun) -> WfsimStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        *out = ptr::null_mut();
        let cfg = &as_ref(cfg, "cfg")?.0;
        let outcome = lift(pipeline::run_case(cfg))?;
        *out = Box::into_raw(Box::new(WfsimRun(outcome)));
        Ok(())
    })
}

/// Number of samples in every series of a run, or 0 for null.
///
/// # Safety
/// `run` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn wfsim_run_len(run: *const WfsimRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.record.len())
}

/// Measured steady-state slip.
///
/// # Safety
/// `run` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn wfsim_run_slip(run: *const WfsimRun, out: *mut f64) -> WfsimStatus {
    guard(|| {
        *as_mut(out, "out")? = as_ref(run, "run")?.0.manifest.derived.slip;
        Ok(())
    })
}

/// Copies one series into `buf`, which must hold [`wfsim_run_len`] values.
///
/// # Safety
/// `run` must be live and `buf` valid for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn wfsim_run_copy_series(
    run: *const WfsimRun,
    series: WfsimSeries,
    buf: *mut f64,
    capacity: usize,
) -> WfsimStatus {
    guard(|| {
        let rec = &as_ref(run, "run")?.0.record;
        if buf.is_null() {
            return Err((WfsimStatus::NullPointer, "buf is null".into()));
        }
        if capacity < rec.len() {
            return Err((
                WfsimStatus::InvalidArgument,
                format!("buffer holds {capacity} values, {} needed", rec.len()),
            ));
        }
        let src = match series {
            WfsimSeries::Time => &rec.t,
            WfsimSeries::Ia => &rec.ia,
            WfsimSeries::Ib => &rec.ib,
            WfsimSeries::Ic => &rec.ic,
            WfsimSeries::Omega => &rec.omega,
            WfsimSeries::Torque => &rec.torque,
            WfsimSeries::Theta => &rec.theta,
        };
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        Ok(())
    })
}

/// Run manifest as JSON; free with [`wfsim_string_free`].
///
/// # Safety
/// `run` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn wfsim_run_manifest_json(run: *const WfsimRun, out: *mut *mut c_char) -> WfsimStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let m = &as_ref(run, "run")?.0.manifest;
        let text = lift(serde_json::to_string_pretty(m).map_err(Error::from))?;
        *out = CString::new(text).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// Writes the run artifacts into directory `dir`.
///
/// # Safety
/// `run` must be live and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wfsim_run_write(run: *const WfsimRun, dir: *const c_char) -> WfsimStatus {
    guard(|| {
        let r = as_ref(run, "run")?;
        let dir = as_str(dir, "dir")?;
        lift(pipeline::write_artifacts(&r.0, Path::new(dir)))
    })
}

/// # Safety
/// `run` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wfsim_run_free(run: *mut WfsimRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
