//! C interface to `chemotaxis-core`.
//!
//! Every function returns a [`KsStatus`]. Objects are opaque handles created
//! by `ks_*_new`/`ks_*_from_*` and released with the matching `ks_*_free`.
//! On failure the message of the last error on the calling thread is
//! available through [`ks_last_error_message`].
//!
//! Array getters follow one convention: the required length is written to
//! `len_out`; with `buf` null nothing else happens, otherwise `cap` must be
//! at least that length.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chemotaxis_core::config::{BuiltModel, RunConfig};
use chemotaxis_core::error::Error;
use chemotaxis_core::fields::{Grid2D, ScalarField};
use chemotaxis_core::integrator::{run_trajectory, Status, TrajectoryRecord};
use chemotaxis_core::noise::SeedCtx;
use chemotaxis_core::operators::{green_solve, heat_semigroup};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    ValidationError = 4,
    BufferTooSmall = 5,
    RuntimeError = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsRunStatus {
    Completed = 0,
    StoppedAtTau = 1,
    Diverged = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsSeries {
    Times = 0,
    SupNorms = 1,
    Masses = 2,
    MinValues = 3,
}

/// Parsed and validated run configuration.
pub struct KsConfig {
    cfg: RunConfig,
    model: BuiltModel,
}

/// Recorded trajectory.
pub struct KsRecord(TrajectoryRecord);

/// Nodal field on a cell-centred grid, y-major.
pub struct KsField(ScalarField);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: KsStatus, msg: impl Into<String>) -> KsStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> KsStatus {
    let status = match &e {
        Error::Config(_) => KsStatus::ConfigError,
        Error::Violation(_) => KsStatus::ValidationError,
        Error::InvalidArgument(_) | Error::InvalidGrid(_) | Error::GridMismatch => KsStatus::InvalidArgument,
        _ => KsStatus::RuntimeError,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> KsStatus) -> KsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(KsStatus::Panic, "panic inside the library"),
    }
}

fn boxed<T>(value: T, out: *mut *mut T) -> KsStatus {
    unsafe { *out = Box::into_raw(Box::new(value)) };
    KsStatus::Ok
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, cap: usize, len_out: *mut usize) -> KsStatus {
    if len_out.is_null() {
        return fail(KsStatus::NullPointer, "len_out is null");
    }
    *len_out = src.len();
    if buf.is_null() {
        return KsStatus::Ok;
    }
    if cap < src.len() {
        return fail(KsStatus::BufferTooSmall, format!("need {} values, buffer holds {cap}", src.len()));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    KsStatus::Ok
}

/// Length of the last error message in bytes, without the terminator.
#[no_mangle]
pub extern "C" fn ks_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message as a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ks_last_error_message(buf: *mut c_char, cap: usize) -> KsStatus {
    if buf.is_null() {
        return KsStatus::NullPointer;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if cap < msg.len() + 1 {
            return KsStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, msg.len());
        *buf.add(msg.len()) = 0;
        KsStatus::Ok
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ks_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses TOML configuration text and runs every applicable validator.
#[no_mangle]
pub unsafe extern "C" fn ks_config_from_toml(text: *const c_char, out: *mut *mut KsConfig) -> KsStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            return fail(KsStatus::NullPointer, "null argument");
        }
        let Ok(text) = CStr::from_ptr(text).to_str() else {
            return fail(KsStatus::InvalidArgument, "configuration is not UTF-8");
        };
        let cfg = match RunConfig::from_toml(text) {
            Ok(c) => c,
            Err(e) => return from_error(e),
        };
        match cfg.build_model() {
            Ok(model) => boxed(KsConfig { cfg, model }, out),
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ks_config_free(cfg: *mut KsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs path `path` of master seed `seed` with the configured integrator.
#[no_mangle]
pub unsafe extern "C" fn ks_simulate(cfg: *const KsConfig, seed: u64, path: u64, out: *mut *mut KsRecord) -> KsStatus {
    guard(|| {
        let (Some(c), false) = (cfg.as_ref(), out.is_null()) else {
            return fail(KsStatus::NullPointer, "null argument");
        };
        let opts = match c.cfg.trajectory_options() {
            Ok(o) => o,
            Err(e) => return from_error(e),
        };
        let i = &c.cfg.integrator;
        match run_trajectory(&c.model.params, i.t_end, i.dt, &SeedCtx::new(seed, path), &opts) {
            Ok(rec) => boxed(KsRecord(rec), out),
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ks_record_free(rec: *mut KsRecord) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ks_record_status(rec: *const KsRecord, status: *mut KsRunStatus) -> KsStatus {
    let (Some(r), false) = (rec.as_ref(), status.is_null()) else {
        return fail(KsStatus::NullPointer, "null argument");
    };
    *status = match r.0.status {
        Status::Completed => KsRunStatus::Completed,
        Status::StoppedAtTau { .. } => KsRunStatus::StoppedAtTau,
        Status::Diverged => KsRunStatus::Diverged,
    };
    KsStatus::Ok
}

/// Copies one recorded time series.
#[no_mangle]
pub unsafe extern "C" fn ks_record_series(
    rec: *const KsRecord,
    which: KsSeries,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> KsStatus {
    let Some(r) = rec.as_ref() else {
        return fail(KsStatus::NullPointer, "record is null");
    };
    let src = match which {
        KsSeries::Times => &r.0.times,
        KsSeries::SupNorms => &r.0.sup_norms,
        KsSeries::Masses => &r.0.masses,
        KsSeries::MinValues => &r.0.min_values,
    };
    copy_out(src, buf, cap, len_out)
}

/// Copies the last field of the record into a new handle.
#[no_mangle]
pub unsafe extern "C" fn ks_record_final_field(rec: *const KsRecord, out: *mut *mut KsField) -> KsStatus {
    let (Some(r), false) = (rec.as_ref(), out.is_null()) else {
        return fail(KsStatus::NullPointer, "null argument");
    };
    boxed(KsField(r.0.final_field.clone()), out)
}

/// Field on `[0, lx] x [0, ly]` from `nx * ny` values, `values[j * nx + i]`.
#[no_mangle]
pub unsafe extern "C" fn ks_field_new(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    values: *const f64,
    out: *mut *mut KsField,
) -> KsStatus {
    guard(|| {
        if values.is_null() || out.is_null() {
            return fail(KsStatus::NullPointer, "null argument");
        }
        let grid = match Grid2D::new(nx, ny, lx, ly) {
            Ok(g) => g,
            Err(e) => return from_error(e),
        };
        let vals = std::slice::from_raw_parts(values, nx * ny).to_vec();
        match ScalarField::from_values(&grid, vals) {
            Ok(f) => boxed(KsField(f), out),
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ks_field_free(field: *mut KsField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ks_field_dims(field: *const KsField, nx: *mut usize, ny: *mut usize) -> KsStatus {
    let (Some(f), false, false) = (field.as_ref(), nx.is_null(), ny.is_null()) else {
        return fail(KsStatus::NullPointer, "null argument");
    };
    *nx = f.0.grid().nx();
    *ny = f.0.grid().ny();
    KsStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn ks_field_values(
    field: *const KsField,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> KsStatus {
    let Some(f) = field.as_ref() else {
        return fail(KsStatus::NullPointer, "field is null");
    };
    copy_out(f.0.values(), buf, cap, len_out)
}

#[no_mangle]
pub unsafe extern "C" fn ks_field_sup_norm(field: *const KsField, out: *mut f64) -> KsStatus {
    let (Some(f), false) = (field.as_ref(), out.is_null()) else {
        return fail(KsStatus::NullPointer, "null argument");
    };
    *out = f.0.sup_norm();
    KsStatus::Ok
}

/// `e^{-tA} u` for the Neumann Laplacian `A`.
#[no_mangle]
pub unsafe extern "C" fn ks_heat_semigroup(field: *const KsField, t: f64, out: *mut *mut KsField) -> KsStatus {
    guard(|| {
        let (Some(f), false) = (field.as_ref(), out.is_null()) else {
            return fail(KsStatus::NullPointer, "null argument");
        };
        match heat_semigroup(&f.0, t) {
            Ok(v) => boxed(KsField(v), out),
            Err(e) => from_error(e),
        }
    })
}

/// Solves `-Δv + v = u` with Neumann conditions.
#[no_mangle]
pub unsafe extern "C" fn ks_green_solve(field: *const KsField, out: *mut *mut KsField) -> KsStatus {
    guard(|| {
        let (Some(f), false) = (field.as_ref(), out.is_null()) else {
            return fail(KsStatus::NullPointer, "null argument");
        };
        match green_solve(&f.0) {
            Ok(v) => boxed(KsField(v), out),
            Err(e) => from_error(e),
        }
    })
}
