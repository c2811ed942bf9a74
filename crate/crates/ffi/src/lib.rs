//! C ABI over the `surfstream` convergence-study and verification drivers.
//!
//! Objects cross the boundary as opaque handles created by `ss_*_new` /
//! `ss_study_run` and released with the matching `ss_*_free`. Every fallible
//! call returns an [`SsStatus`]; on failure the message is available from
//! [`ss_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use surfstream::study::{run_convergence_study, ConvergenceReport, DataChoice, StudyConfig, SurfaceChoice, Variant};
use surfstream::verify::{run_verification, VerifyConfig};
use surfstream::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotConverged = 3,
    Geometry = 4,
    Io = 5,
    BufferTooSmall = 6,
    Internal = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsSurface {
    Ellipsoid = 0,
    Sphere = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsData {
    Smooth = 0,
    Rotation = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsVariant {
    StreamTilde = 0,
    StreamCe = 1,
    VelPiola = 2,
    VelCe = 3,
}

/// One row of a convergence table. Unselected error variants are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SsRecord {
    pub level: u32,
    pub h: f64,
    pub ndof: u64,
    pub err_stream_tilde: f64,
    pub err_stream_ce: f64,
    pub err_vel_piola: f64,
    pub err_vel_ce: f64,
    pub iterations: u64,
}

/// Opaque study configuration.
pub struct SsStudyConfig(StudyConfig);

/// Opaque convergence report.
pub struct SsReport(ConvergenceReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> SsStatus {
    match e {
        Error::NonConvergence { .. } | Error::ProjectionFailed { .. } => SsStatus::NotConverged,
        Error::SingularPoint { .. }
        | Error::NonManifold(_)
        | Error::InvertedElement { .. }
        | Error::OrientationMismatch { .. } => SsStatus::Geometry,
        Error::InvalidInput(_)
        | Error::DimensionMismatch { .. }
        | Error::UnsupportedOrder { .. }
        | Error::UnsupportedQuadrature { .. }
        | Error::SizeExceeded { .. } => SsStatus::InvalidArgument,
        Error::Io(_) | Error::Csv(_) => SsStatus::Io,
        Error::ArithmeticDomain(_) => SsStatus::Internal,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (SsStatus, String)>) -> SsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(msg);
            SsStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (SsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SsStatus, String) {
    (SsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn config_mut<'a>(c: *mut SsStudyConfig) -> Result<&'a mut StudyConfig, (SsStatus, String)> {
    c.as_mut().map(|c| &mut c.0).ok_or_else(|| null("config"))
}

unsafe fn report_ref<'a>(r: *const SsReport) -> Result<&'a ConvergenceReport, (SsStatus, String)> {
    r.as_ref().map(|r| &r.0).ok_or_else(|| null("report"))
}

fn variant(v: SsVariant) -> Variant {
    match v {
        SsVariant::StreamTilde => Variant::StreamTilde,
        SsVariant::StreamCe => Variant::StreamCe,
        SsVariant::VelPiola => Variant::VelPiola,
        SsVariant::VelCe => Variant::VelCe,
    }
}

fn surface(s: SsSurface) -> SurfaceChoice {
    match s {
        SsSurface::Ellipsoid => SurfaceChoice::Ellipsoid,
        SsSurface::Sphere => SurfaceChoice::Sphere,
    }
}

/// Copy `bytes` plus a terminating NUL into `buf`. `needed` receives the
/// full size including the NUL even when `buf` is too small or null.
unsafe fn write_buffer(bytes: &[u8], buf: *mut c_char, cap: usize, needed: *mut usize) -> Result<(), (SsStatus, String)> {
    if !needed.is_null() {
        *needed = bytes.len() + 1;
    }
    if buf.is_null() || cap < bytes.len() + 1 {
        return Err((SsStatus::BufferTooSmall, format!("buffer needs {} bytes", bytes.len() + 1)));
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), bytes.len());
    *buf.add(bytes.len()) = 0;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ss_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// New configuration with the default study (ellipsoid, k = 2, k_g = 2,
/// levels 1..4).
#[no_mangle]
pub extern "C" fn ss_study_config_new() -> *mut SsStudyConfig {
    Box::into_raw(Box::new(SsStudyConfig(StudyConfig::default())))
}

/// # Safety
/// `config` must come from [`ss_study_config_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ss_study_config_free(config: *mut SsStudyConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_study_config_set_problem(config: *mut SsStudyConfig, surf: SsSurface, data: SsData) -> SsStatus {
    guard(|| {
        let c = config_mut(config)?;
        c.surface = surface(surf);
        c.data = match data {
            SsData::Smooth => DataChoice::Smooth,
            SsData::Rotation => DataChoice::Rotation,
        };
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_study_config_set_degrees(config: *mut SsStudyConfig, k: u32, kg: u32) -> SsStatus {
    guard(|| {
        let c = config_mut(config)?;
        c.k = k as usize;
        c.kg = kg as usize;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle and `levels` must point to `len` values.
#[no_mangle]
pub unsafe extern "C" fn ss_study_config_set_levels(config: *mut SsStudyConfig, levels: *const u32, len: usize) -> SsStatus {
    guard(|| {
        let c = config_mut(config)?;
        if levels.is_null() && len > 0 {
            return Err(null("levels"));
        }
        c.levels = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(levels, len).iter().map(|&l| l as usize).collect()
        };
        Ok(())
    })
}

/// Penalty parameter; a non-positive or NaN value restores the default 10k².
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_study_config_set_sigma(config: *mut SsStudyConfig, sigma: f64) -> SsStatus {
    guard(|| {
        config_mut(config)?.sigma = (sigma > 0.0).then_some(sigma);
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_study_config_set_solver(config: *mut SsStudyConfig, rel_tol: f64, max_iter: u64) -> SsStatus {
    guard(|| {
        let c = config_mut(config)?;
        c.solver_tol = rel_tol;
        c.max_iter = max_iter as usize;
        Ok(())
    })
}

/// Validate `config`, run every level and store a new report in `*out`.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_study_run(config: *const SsStudyConfig, out: *mut *mut SsReport) -> SsStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        c.0.validate().map_err(lib_err)?;
        let report = run_convergence_study(&c.0).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SsReport(report)));
        Ok(())
    })
}

/// # Safety
/// `report` must come from [`ss_study_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ss_report_free(report: *mut SsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Number of levels in the report; 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_report_len(report: *const SsReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.records.len())
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_report_record(report: *const SsReport, index: usize, out: *mut SsRecord) -> SsStatus {
    guard(|| {
        let r = report_ref(report)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let rec = r
            .records
            .get(index)
            .ok_or_else(|| (SsStatus::InvalidArgument, format!("index {index} out of range")))?;
        *out = SsRecord {
            level: rec.level as u32,
            h: rec.h,
            ndof: rec.ndof as u64,
            err_stream_tilde: rec.err_stream_tilde,
            err_stream_ce: rec.err_stream_ce,
            err_vel_piola: rec.err_vel_piola,
            err_vel_ce: rec.err_vel_ce,
            iterations: rec.iterations as u64,
        };
        Ok(())
    })
}

/// Observed order between levels `index` and `index + 1`; NaN when undefined.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_report_rate(report: *const SsReport, v: SsVariant, index: usize, out: *mut f64) -> SsStatus {
    guard(|| {
        let r = report_ref(report)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let rates = r.rates(variant(v));
        let rate = rates
            .get(index)
            .ok_or_else(|| (SsStatus::InvalidArgument, format!("rate index {index} out of range")))?;
        *out = rate.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Write the CSV table into `buf`. Pass a null `buf` to query the size.
///
/// # Safety
/// `report` must be a live handle; `buf` must be null or hold `cap` bytes;
/// `needed` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn ss_report_csv(report: *const SsReport, buf: *mut c_char, cap: usize, needed: *mut usize) -> SsStatus {
    guard(|| {
        let csv = report_ref(report)?.to_csv().map_err(lib_err)?;
        write_buffer(&csv, buf, cap, needed)
    })
}

/// Run the verification suites and write the JSON summary into `buf`.
/// `*passed` is set to 1 when every suite passes, else 0. A non-positive
/// `sigma` selects the default penalty.
///
/// # Safety
/// `passed` must be valid; `buf` must be null or hold `cap` bytes; `needed`
/// must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn ss_verify(
    surf: SsSurface,
    level: u32,
    k: u32,
    kg: u32,
    sigma: f64,
    flip_penalty_sign: bool,
    passed: *mut i32,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> SsStatus {
    guard(|| {
        let passed = passed.as_mut().ok_or_else(|| null("passed"))?;
        let config = VerifyConfig {
            surface: surface(surf),
            level: level as usize,
            k: k as usize,
            kg: kg as usize,
            sigma: (sigma > 0.0).then_some(sigma),
            flip_penalty_sign,
            ..VerifyConfig::default()
        };
        let report = run_verification(&config).map_err(lib_err)?;
        *passed = i32::from(report.passed());
        write_buffer(report.to_json().as_bytes(), buf, cap, needed)
    })
}
