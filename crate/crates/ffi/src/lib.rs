//! C ABI for `pseudolin`.
//!
//! Every fallible call returns a [`PlStatus`]; on failure the thread-local
//! message from [`pl_last_error`] describes the cause. Handles are opaque
//! and must be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::OnceLock;

use pseudolin::config::{Config, ResolvedSystem, SystemSpec};
use pseudolin::corpus::corpus_names;
use pseudolin::criteria::{certify_t31, certify_t32, Certificate, SamplingPlan, Verdict};
use pseudolin::envelope::EnvelopeSet;
use pseudolin::integrator::{integrate, IntegrationConfig, Status, Trajectory};
use pseudolin::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownEntry = 3,
    InvalidParam = 4,
    Numeric = 5,
    NotHomogeneous = 6,
    MissingBracket = 7,
    MissingEnvelopes = 8,
    Config = 9,
    Io = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlRunStatus {
    Completed = 0,
    BlewUp = 1,
    ToleranceFailure = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlVerdict {
    Certified = 0,
    HypothesisFalsified = 1,
    BoundViolated = 2,
    BlewUp = 3,
    Inconclusive = 4,
}

/// A resolved system with its default envelopes and initial values.
pub struct PlSystem {
    inner: ResolvedSystem,
    envelopes: Option<EnvelopeSet>,
}

pub struct PlTrajectory {
    inner: Trajectory,
}

pub struct PlCertificate {
    inner: Certificate,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> PlStatus {
    match e {
        Error::UnknownEntry(_) => PlStatus::UnknownEntry,
        Error::InvalidParam { .. } | Error::UnsupportedParameterCase(_) => PlStatus::InvalidParam,
        Error::NonFiniteCoefficient { .. } | Error::GridTooCoarse { .. } | Error::OverflowGuard { .. } => {
            PlStatus::Numeric
        }
        Error::NotHomogeneous => PlStatus::NotHomogeneous,
        Error::MissingBracket => PlStatus::MissingBracket,
        Error::Config(_) => PlStatus::Config,
        Error::Io(_) => PlStatus::Io,
        _ => PlStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (PlStatus, String)>) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PlStatus::Panic
        }
    }
}

fn lib<T>(r: pseudolin::Result<T>) -> Result<T, (PlStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (PlStatus, String) {
    (PlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (PlStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (PlStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn integration_config(rtol: f64, atol: f64) -> Result<IntegrationConfig, (PlStatus, String)> {
    let mut cfg = IntegrationConfig::default();
    if rtol > 0.0 {
        cfg.rtol = rtol;
    }
    if atol > 0.0 {
        cfg.atol = atol;
    }
    lib(cfg.validate())?;
    Ok(cfg)
}

fn plan(seed: u64) -> SamplingPlan {
    SamplingPlan { rng_seed: seed, ..Default::default() }
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn pl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn names() -> &'static [CString] {
    static NAMES: OnceLock<Vec<CString>> = OnceLock::new();
    NAMES.get_or_init(|| corpus_names().into_iter().map(|n| CString::new(n).unwrap()).collect())
}

#[no_mangle]
pub extern "C" fn pl_corpus_count() -> usize {
    names().len()
}

/// Static name of corpus entry `i`, or null when out of range.
#[no_mangle]
pub extern "C" fn pl_corpus_name(i: usize) -> *const c_char {
    names().get(i).map_or(ptr::null(), |s| s.as_ptr())
}

/// Builds a corpus system with `n` parameter overrides.
///
/// # Safety
/// `name` must be a NUL-terminated string. When `n > 0`, `param_names` and
/// `values` must point to `n` readable elements. `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_system_from_corpus(
    name: *const c_char,
    param_names: *const *const c_char,
    values: *const f64,
    n: usize,
    out: *mut *mut PlSystem,
) -> PlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = str_arg(name, "name")?;
        let mut params = Vec::with_capacity(n);
        if n > 0 {
            if param_names.is_null() || values.is_null() {
                return Err(null("parameter arrays"));
            }
            for i in 0..n {
                params.push((str_arg(*param_names.add(i), "parameter name")?.to_string(), *values.add(i)));
            }
        }
        let inner = lib(SystemSpec::Corpus { name: name.into(), params }.resolve())?;
        let envelopes = inner.envelopes.clone();
        *out = Box::into_raw(Box::new(PlSystem { inner, envelopes }));
        Ok(())
    })
}

/// Builds a system from INI text with `[system]` and optional `[envelopes]`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pl_system_from_config(text: *const c_char, out: *mut *mut PlSystem) -> PlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = lib(Config::parse(str_arg(text, "text")?))?;
        let spec = cfg.system.clone().ok_or((PlStatus::Config, "config has no [system] section".to_string()))?;
        let inner = lib(spec.resolve())?;
        let envelopes = cfg.apply_envelopes(inner.envelopes.clone());
        *out = Box::into_raw(Box::new(PlSystem { inner, envelopes }));
        Ok(())
    })
}

/// # Safety
/// `sys` must be null or a handle from a `pl_system_*` constructor, freed once.
#[no_mangle]
pub unsafe extern "C" fn pl_system_free(sys: *mut PlSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Initial time and default initial values of a system.
///
/// # Safety
/// `sys` must be a live handle; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_system_defaults(
    sys: *const PlSystem,
    t0: *mut f64,
    phi0: *mut f64,
    psi0: *mut f64,
) -> PlStatus {
    guard(|| {
        let sys = sys.as_ref().ok_or_else(|| null("sys"))?;
        if t0.is_null() || phi0.is_null() || psi0.is_null() {
            return Err(null("output"));
        }
        *t0 = sys.inner.system.t0;
        (*phi0, *psi0) = sys.inner.initial;
        Ok(())
    })
}

/// Integrates on `[t0, t_end]`. Non-positive tolerances select defaults.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pl_integrate(
    sys: *const PlSystem,
    phi0: f64,
    psi0: f64,
    t_end: f64,
    rtol: f64,
    atol: f64,
    out: *mut *mut PlTrajectory,
) -> PlStatus {
    guard(|| {
        let sys = sys.as_ref().ok_or_else(|| null("sys"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = integration_config(rtol, atol)?;
        let system = &sys.inner.system;
        let inner = lib(integrate(system, phi0, psi0, (system.t0, t_end), &cfg))?;
        *out = Box::into_raw(Box::new(PlTrajectory { inner }));
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a handle from [`pl_integrate`], freed once.
#[no_mangle]
pub unsafe extern "C" fn pl_trajectory_free(traj: *mut PlTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_trajectory_len(traj: *const PlTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.len())
}

/// Run status; `t_stop` receives the final time, the escape estimate or the
/// failure time.
///
/// # Safety
/// `traj` must be a live handle; `status` and `t_stop` writable.
#[no_mangle]
pub unsafe extern "C" fn pl_trajectory_status(
    traj: *const PlTrajectory,
    status: *mut PlRunStatus,
    t_stop: *mut f64,
) -> PlStatus {
    guard(|| {
        let traj = traj.as_ref().ok_or_else(|| null("traj"))?;
        if status.is_null() || t_stop.is_null() {
            return Err(null("output"));
        }
        (*status, *t_stop) = match traj.inner.status() {
            Status::Completed => (PlRunStatus::Completed, traj.inner.t_end()),
            Status::BlewUp { t_blow } => (PlRunStatus::BlewUp, t_blow),
            Status::ToleranceFailure { t_fail } => (PlRunStatus::ToleranceFailure, t_fail),
        };
        Ok(())
    })
}

/// Copies up to `cap` nodes into the three arrays; returns the count copied.
///
/// # Safety
/// `traj` must be a live handle and each array must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn pl_trajectory_copy(
    traj: *const PlTrajectory,
    t: *mut f64,
    phi: *mut f64,
    psi: *mut f64,
    cap: usize,
) -> usize {
    let Some(traj) = traj.as_ref() else {
        set_error("traj is null");
        return 0;
    };
    if t.is_null() || phi.is_null() || psi.is_null() {
        set_error("output array is null");
        return 0;
    }
    let n = traj.inner.len().min(cap);
    ptr::copy_nonoverlapping(traj.inner.nodes().as_ptr(), t, n);
    ptr::copy_nonoverlapping(traj.inner.phi().as_ptr(), phi, n);
    ptr::copy_nonoverlapping(traj.inner.psi().as_ptr(), psi, n);
    n
}

fn envelopes_of(sys: &PlSystem) -> Result<&EnvelopeSet, (PlStatus, String)> {
    sys.envelopes
        .as_ref()
        .ok_or((PlStatus::MissingEnvelopes, "system has no envelopes; build it from a config with [envelopes]".into()))
}

/// Envelope criterion with the default sampling plan and `seed`.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pl_certify_t31(
    sys: *const PlSystem,
    phi0: f64,
    psi0: f64,
    t_end: f64,
    seed: u64,
    out: *mut *mut PlCertificate,
) -> PlStatus {
    guard(|| {
        let sys = sys.as_ref().ok_or_else(|| null("sys"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let env = envelopes_of(sys)?;
        let cert = lib(certify_t31(&sys.inner.system, env, phi0, psi0, t_end, &plan(seed), &Default::default()))?;
        *out = Box::into_raw(Box::new(PlCertificate { inner: cert }));
        Ok(())
    })
}

/// Bound-curve criterion with the default sampling plan and `seed`.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pl_certify_t32(
    sys: *const PlSystem,
    c1: f64,
    c2: f64,
    eps: f64,
    t_end: f64,
    seed: u64,
    out: *mut *mut PlCertificate,
) -> PlStatus {
    guard(|| {
        let sys = sys.as_ref().ok_or_else(|| null("sys"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let env = envelopes_of(sys)?;
        let cert = lib(certify_t32(&sys.inner.system, env, c1, c2, eps, t_end, &plan(seed), &Default::default()))?;
        *out = Box::into_raw(Box::new(PlCertificate { inner: cert }));
        Ok(())
    })
}

/// # Safety
/// `cert` must be null or a handle from a `pl_certify_*` call, freed once.
#[no_mangle]
pub unsafe extern "C" fn pl_certificate_free(cert: *mut PlCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// # Safety
/// `cert` must be a live handle and `verdict` writable.
#[no_mangle]
pub unsafe extern "C" fn pl_certificate_verdict(cert: *const PlCertificate, verdict: *mut PlVerdict) -> PlStatus {
    guard(|| {
        let cert = cert.as_ref().ok_or_else(|| null("cert"))?;
        if verdict.is_null() {
            return Err(null("verdict"));
        }
        *verdict = match cert.inner.verdict {
            Verdict::Certified => PlVerdict::Certified,
            Verdict::HypothesisFalsified { .. } => PlVerdict::HypothesisFalsified,
            Verdict::BoundViolated { .. } => PlVerdict::BoundViolated,
            Verdict::BlewUp { .. } => PlVerdict::BlewUp,
            Verdict::Inconclusive { .. } => PlVerdict::Inconclusive,
        };
        Ok(())
    })
}

/// `key=value` report as a new string; release with [`pl_string_free`].
/// Returns null for a null handle.
///
/// # Safety
/// `cert` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_certificate_kv(cert: *const PlCertificate) -> *mut c_char {
    match cert.as_ref() {
        Some(c) => CString::new(c.inner.to_kv()).map_or(ptr::null_mut(), CString::into_raw),
        None => {
            set_error("cert is null");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn pl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
