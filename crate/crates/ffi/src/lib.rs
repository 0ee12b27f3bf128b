//! C ABI over `critwell`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free`. Every fallible call returns a [`CritwellStatus`]; the
//! message of the most recent failure on the calling thread is available from
//! [`critwell_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use critwell::solver::{self, SolverConfig, SpectrumResult};
use critwell::theory::TheoryReport;
use critwell::{Error, Geometry, Profile, ProfileKind};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CritwellStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DegenerateStrip = 3,
    Io = 4,
    Numerical = 5,
    Unavailable = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CritwellProfileKind {
    Sine = 0,
    BumpDerivative = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CritwellBackend {
    ModeGalerkin = 0,
    FdStairstep = 1,
}

/// Opaque deformation profile.
pub struct CritwellProfile(Profile);

/// Opaque solver result.
pub struct CritwellSpectrum(SpectrumResult);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CritwellSolverOptions {
    pub l: f64,
    pub nx: usize,
    pub n_modes: usize,
    pub eig_tol: f64,
    pub max_iter: usize,
    pub backend: CritwellBackend,
    pub adapt_l: bool,
    pub k: usize,
    pub max_unknowns: usize,
}

/// Theory quantities; `has_c1`/`has_c2` say whether `c1`/`c2` are defined.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CritwellTheory {
    pub k: f64,
    pub z: f64,
    pub z_threshold: f64,
    pub d0: f64,
    pub d1: f64,
    pub c1: f64,
    pub c2: f64,
    pub has_c1: bool,
    pub has_c2: bool,
    pub threshold: f64,
    pub nonexistence_applies: bool,
    pub existence_applies: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CritwellStatus {
    match e {
        Error::InvalidParameter { .. }
        | Error::ZeroProfile
        | Error::ModeIndex { .. }
        | Error::Table { .. }
        | Error::NonZeroMean { .. }
        | Error::Config { .. }
        | Error::QuadratureCoverage { .. } => CritwellStatus::InvalidArgument,
        Error::DegenerateStrip { .. } => CritwellStatus::DegenerateStrip,
        Error::Io(_) | Error::Json(_) => CritwellStatus::Io,
        Error::Unavailable { .. } | Error::InsufficientData(_) => CritwellStatus::Unavailable,
        Error::TooLarge { .. } | Error::NoConvergence { .. } | Error::Breakdown(_) => CritwellStatus::Numerical,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), CritwellStatus>) -> CritwellStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CritwellStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic".into());
            CritwellStatus::Panic
        }
    }
}

fn fail(e: Error) -> CritwellStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> CritwellStatus {
    set_error(format!("null pointer: {what}"));
    CritwellStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, CritwellStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), CritwellStatus> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn critwell_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn critwell_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn critwell_profile_new(
    kind: CritwellProfileKind,
    b: f64,
    amplitude: f64,
    out: *mut *mut CritwellProfile,
) -> CritwellStatus {
    guard(|| {
        let kind = match kind {
            CritwellProfileKind::Sine => ProfileKind::Sine,
            CritwellProfileKind::BumpDerivative => ProfileKind::BumpDerivative,
        };
        let p = critwell::make_profile(kind, b, amplitude).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(CritwellProfile(p))), "out")
    })
}

/// Tabulated profile from a two-column `x f` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn critwell_profile_from_table(
    path: *const c_char,
    amplitude: f64,
    out: *mut *mut CritwellProfile,
) -> CritwellStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| {
            set_error("path is not valid UTF-8".into());
            CritwellStatus::InvalidArgument
        })?;
        let p = Profile::from_table_file(Path::new(path), amplitude).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(CritwellProfile(p))), "out")
    })
}

/// # Safety
/// `p` must come from a `critwell_profile_*` constructor and not be used
/// afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn critwell_profile_free(p: *mut CritwellProfile) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// `f`, `f′`, `f″` at `x`.
///
/// # Safety
/// `p` must be a live profile; the output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn critwell_profile_eval(
    p: *const CritwellProfile,
    x: f64,
    f: *mut f64,
    df: *mut f64,
    d2f: *mut f64,
) -> CritwellStatus {
    guard(|| {
        let p = deref(p, "profile")?;
        let (v, d1, d2) = p.0.derivatives(x);
        write_out(f, v, "f")?;
        write_out(df, d1, "df")?;
        write_out(d2f, d2, "d2f")
    })
}

/// `‖f‖²` and `‖f′‖²`.
///
/// # Safety
/// `p` must be a live profile; the output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn critwell_profile_norms(
    p: *const CritwellProfile,
    normf2: *mut f64,
    normfp2: *mut f64,
) -> CritwellStatus {
    guard(|| {
        let n = deref(p, "profile")?.0.norms();
        write_out(normf2, n.normf2, "normf2")?;
        write_out(normfp2, n.normfp2, "normfp2")
    })
}

/// Theory constants for width `a` and the profile's support at `lambda`.
///
/// # Safety
/// `p` must be a live profile; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn critwell_theory(
    a: f64,
    p: *const CritwellProfile,
    lambda: f64,
    out: *mut CritwellTheory,
) -> CritwellStatus {
    guard(|| {
        let p = &deref(p, "profile")?.0;
        let g = Geometry::new(a, p.b(), lambda).map_err(fail)?;
        let t = TheoryReport::compute(&g, p).map_err(fail)?;
        let report = CritwellTheory {
            k: t.K,
            z: t.z,
            z_threshold: t.z_threshold,
            d0: t.d0,
            d1: t.d1,
            c1: t.c1.unwrap_or(f64::NAN),
            c2: t.c2.unwrap_or(f64::NAN),
            has_c1: t.c1.is_some(),
            has_c2: t.c2.is_some(),
            threshold: t.threshold,
            nonexistence_applies: t.nonexistence_applies,
            existence_applies: t.existence_applies,
        };
        write_out(out, report, "out")
    })
}

fn to_options(c: &SolverConfig) -> CritwellSolverOptions {
    CritwellSolverOptions {
        l: c.l,
        nx: c.nx,
        n_modes: c.n_modes,
        eig_tol: c.eig_tol,
        max_iter: c.max_iter,
        backend: match c.backend {
            solver::Backend::ModeGalerkin => CritwellBackend::ModeGalerkin,
            solver::Backend::FdStairstep => CritwellBackend::FdStairstep,
        },
        adapt_l: c.adapt_l,
        k: c.k,
        max_unknowns: c.max_unknowns,
    }
}

fn from_options(o: &CritwellSolverOptions) -> SolverConfig {
    SolverConfig {
        l: o.l,
        nx: o.nx,
        n_modes: o.n_modes,
        eig_tol: o.eig_tol,
        max_iter: o.max_iter,
        backend: match o.backend {
            CritwellBackend::ModeGalerkin => solver::Backend::ModeGalerkin,
            CritwellBackend::FdStairstep => solver::Backend::FdStairstep,
        },
        adapt_l: o.adapt_l,
        k: o.k,
        max_unknowns: o.max_unknowns,
    }
}

/// Default options for width `a` and half-support `b`: `L = b + 10a`,
/// spacing `a/40`, 10 modes.
///
/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn critwell_solver_options_default(
    a: f64,
    b: f64,
    out: *mut CritwellSolverOptions,
) -> CritwellStatus {
    guard(|| {
        let g = Geometry::new(a, b, 0.0).map_err(fail)?;
        write_out(out, to_options(&SolverConfig::defaults_for(&g)), "out")
    })
}

/// Lowest eigenvalues on the strip of width `a` deformed by `lambda·f`.
/// `opts` may be NULL for the defaults.
///
/// # Safety
/// `p` must be a live profile, `opts` NULL or valid, `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn critwell_solve(
    a: f64,
    p: *const CritwellProfile,
    lambda: f64,
    opts: *const CritwellSolverOptions,
    out: *mut *mut CritwellSpectrum,
) -> CritwellStatus {
    guard(|| {
        let p = &deref(p, "profile")?.0;
        let g = Geometry::new(a, p.b(), lambda).map_err(fail)?;
        let cfg = match opts.as_ref() {
            Some(o) => from_options(o),
            None => SolverConfig::defaults_for(&g),
        };
        p.check_nondegenerate(lambda).map_err(fail)?;
        cfg.validate(&g).map_err(fail)?;
        let r = solver::solve(&g, p, &cfg).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(CritwellSpectrum(r))), "out")
    })
}

/// # Safety
/// `s` must come from [`critwell_solve`] and not be used afterwards. NULL is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn critwell_spectrum_free(s: *mut CritwellSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of computed eigenvalues; 0 for NULL.
///
/// # Safety
/// `s` must be NULL or a live spectrum.
#[no_mangle]
pub unsafe extern "C" fn critwell_spectrum_len(s: *const CritwellSpectrum) -> usize {
    s.as_ref().map_or(0, |s| s.0.eigenvalues.len())
}

/// Eigenvalue `i` (ascending, 0-based).
///
/// # Safety
/// `s` must be a live spectrum; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn critwell_spectrum_eigenvalue(
    s: *const CritwellSpectrum,
    i: usize,
    out: *mut f64,
) -> CritwellStatus {
    guard(|| {
        let s = deref(s, "spectrum")?;
        let v = *s.0.eigenvalues.get(i).ok_or_else(|| {
            set_error(format!(
                "eigenvalue index {i} out of range 0..{}",
                s.0.eigenvalues.len()
            ));
            CritwellStatus::InvalidArgument
        })?;
        write_out(out, v, "out")
    })
}

/// Summary diagnostics of the lowest eigenpair.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CritwellSummary {
    pub threshold: f64,
    pub gap: f64,
    pub localization: f64,
    pub residual: f64,
    pub is_bound_state: bool,
    pub l_used: f64,
    pub h: f64,
}

/// # Safety
/// `s` must be a live spectrum; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn critwell_spectrum_summary(
    s: *const CritwellSpectrum,
    out: *mut CritwellSummary,
) -> CritwellStatus {
    guard(|| {
        let r = &deref(s, "spectrum")?.0;
        let summary = CritwellSummary {
            threshold: r.threshold,
            gap: r.gap,
            localization: r.localization,
            residual: r.residual,
            is_bound_state: r.is_bound_state,
            l_used: r.l_used,
            h: r.h,
        };
        write_out(out, summary, "out")
    })
}
