use std::ffi::CStr;
use std::ptr;

use critwell_ffi::*;

fn last_error() -> String {
    let p = critwell_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn sine(b: f64) -> *mut CritwellProfile {
    let mut p = ptr::null_mut();
    let s = unsafe { critwell_profile_new(CritwellProfileKind::Sine, b, 1.0, &mut p) };
    assert_eq!(s, CritwellStatus::Ok);
    p
}

#[test]
fn theory_constants_through_the_abi() {
    let p = sine(2.5);
    let mut t = CritwellTheory::default();
    assert_eq!(unsafe { critwell_theory(1.0, p, 0.1, &mut t) }, CritwellStatus::Ok);
    assert!((t.z - 6.25).abs() < 1e-9);
    assert!(t.existence_applies && !t.nonexistence_applies);
    assert!(t.has_c1 && t.has_c2);
    assert!((t.c2 - 1096.13).abs() < 0.1);
    let (mut n, mut dn) = (0.0, 0.0);
    assert_eq!(
        unsafe { critwell_profile_norms(p, &mut n, &mut dn) },
        CritwellStatus::Ok
    );
    assert!((n - 2.5).abs() < 1e-9);
    unsafe { critwell_profile_free(p) };
}

#[test]
fn solve_finds_the_bound_state() {
    let p = sine(2.5);
    let mut opts = unsafe { std::mem::zeroed::<CritwellSolverOptions>() };
    assert_eq!(
        unsafe { critwell_solver_options_default(1.0, 2.5, &mut opts) },
        CritwellStatus::Ok
    );
    opts.l = 8.0;
    opts.nx = 320;
    opts.n_modes = 4;
    opts.k = 2;
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { critwell_solve(1.0, p, 0.1, &opts, &mut s) },
        CritwellStatus::Ok
    );
    assert_eq!(unsafe { critwell_spectrum_len(s) }, 2);
    let mut e0 = 0.0;
    assert_eq!(
        unsafe { critwell_spectrum_eigenvalue(s, 0, &mut e0) },
        CritwellStatus::Ok
    );
    let mut summary = CritwellSummary::default();
    assert_eq!(
        unsafe { critwell_spectrum_summary(s, &mut summary) },
        CritwellStatus::Ok
    );
    assert!(summary.is_bound_state);
    assert!((summary.gap - (e0 - summary.threshold)).abs() < 1e-14);
    assert!(summary.gap < -0.6 && summary.gap > -0.8, "{}", summary.gap);
    let mut dummy = 0.0;
    assert_eq!(
        unsafe { critwell_spectrum_eigenvalue(s, 5, &mut dummy) },
        CritwellStatus::InvalidArgument
    );
    assert!(last_error().contains("out of range"));
    unsafe {
        critwell_spectrum_free(s);
        critwell_profile_free(p);
    }
}

#[test]
fn errors_map_to_codes() {
    let mut p = ptr::null_mut();
    let s = unsafe { critwell_profile_new(CritwellProfileKind::Sine, -1.0, 1.0, &mut p) };
    assert_eq!(s, CritwellStatus::InvalidArgument);
    assert!(p.is_null());
    assert!(!last_error().is_empty());

    let p = sine(2.5);
    let mut out = ptr::null_mut();
    let s = unsafe { critwell_solve(1.0, p, 1.5, ptr::null(), &mut out) };
    assert_eq!(s, CritwellStatus::DegenerateStrip);
    assert!(last_error().contains("degenerate"));

    let s = unsafe { critwell_solve(1.0, ptr::null(), 0.1, ptr::null(), &mut out) };
    assert_eq!(s, CritwellStatus::NullPointer);
    assert_eq!(
        unsafe { critwell_profile_norms(p, ptr::null_mut(), ptr::null_mut()) },
        CritwellStatus::NullPointer
    );

    let missing = c"/nonexistent/table.txt";
    let s = unsafe { critwell_profile_from_table(missing.as_ptr(), 1.0, &mut out.cast()) };
    assert_eq!(s, CritwellStatus::Io);
    unsafe {
        critwell_profile_free(p);
        critwell_profile_free(ptr::null_mut());
        critwell_spectrum_free(ptr::null_mut());
    }
}

#[test]
fn profile_evaluation_and_version() {
    let p = sine(2.0);
    let (mut f, mut df, mut d2f) = (0.0, 0.0, 0.0);
    assert_eq!(
        unsafe { critwell_profile_eval(p, 0.5, &mut f, &mut df, &mut d2f) },
        CritwellStatus::Ok
    );
    let w = std::f64::consts::PI / 2.0;
    assert!((f - (w * 0.5).sin()).abs() < 1e-12);
    assert!((df - w * (w * 0.5).cos()).abs() < 1e-12);
    unsafe { critwell_profile_free(p) };
    let v = unsafe { CStr::from_ptr(critwell_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
