use std::ffi::{c_char, CStr, CString};
use std::ptr;

use cpre_ffi::*;

fn last_error() -> String {
    let mut len = 0usize;
    let mut buf = vec![0 as c_char; 512];
    let st = unsafe { cpre_last_error(buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(st, CpreStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string()
}

fn env(spec: &str, seed: u64) -> *mut CpreEnv {
    let s = CString::new(spec).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { cpre_env_new(s.as_ptr(), seed, &mut out) }, CpreStatus::Ok);
    assert!(!out.is_null());
    out
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(cpre_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn bad_arguments_map_to_codes() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { cpre_env_new(ptr::null(), 1, &mut out) }, CpreStatus::NullPointer);
    assert!(last_error().contains("spec"));
    let bad = CString::new("point(-2)").unwrap();
    assert_eq!(unsafe { cpre_env_new(bad.as_ptr(), 1, &mut out) }, CpreStatus::InvalidArgument);
    let junk = [0xffu8, 0xfe, 0];
    assert_eq!(unsafe { cpre_env_new(junk.as_ptr().cast(), 1, &mut out) }, CpreStatus::InvalidUtf8);
    assert!(out.is_null());
    let e = env("point(1.0)", 1);
    let mut rate = 0.0;
    let far = CpreSite { re: 0, im: 0 };
    let far2 = CpreSite { re: 5, im: 0 };
    assert_eq!(unsafe { cpre_env_rate(e, far, far2, &mut rate) }, CpreStatus::InvalidArgument);
    let below = CpreSite { re: 0, im: -1 };
    assert_eq!(unsafe { cpre_env_rate(e, far, below, &mut rate) }, CpreStatus::OutOfWindow);
    assert_eq!(unsafe { cpre_env_rate(e, far, CpreSite { re: 1, im: 0 }, &mut rate) }, CpreStatus::Ok);
    assert_eq!(rate, 1.0);
    unsafe { cpre_env_free(e) };
    unsafe { cpre_env_free(ptr::null_mut()) };
}

#[test]
fn export_import_round_trip_with_buffer_negotiation() {
    let e = env("uniform(0.5,2.5)", 7);
    let mut len = 0usize;
    let st = unsafe { cpre_env_export(e, 0, 0, 3, 2, ptr::null_mut(), 0, &mut len) };
    assert_eq!(st, CpreStatus::BufferTooSmall);
    assert!(len > 0);
    let mut buf = vec![0 as c_char; len + 1];
    assert_eq!(unsafe { cpre_env_export(e, 0, 0, 3, 2, buf.as_mut_ptr(), buf.len(), &mut len) }, CpreStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { cpre_env_import(buf.as_ptr(), &mut back) }, CpreStatus::Ok);
    for x in 0..3 {
        let (a, b) = (CpreSite { re: x, im: 1 }, CpreSite { re: x + 1, im: 1 });
        let (mut r1, mut r2) = (0.0, 0.0);
        unsafe {
            cpre_env_rate(e, a, b, &mut r1);
            cpre_env_rate(back, a, b, &mut r2);
        }
        assert_eq!(r1.to_bits(), r2.to_bits());
    }
    unsafe {
        cpre_env_free(e);
        cpre_env_free(back);
    }
}

#[test]
fn evolve_through_handles() {
    let e = env("point(0.0)", 1);
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { cpre_rep_sample(e, 0, 0, 4, 2, 5.0, 3, &mut rep) }, CpreStatus::Ok);
    let mut marks = 0usize;
    assert_eq!(unsafe { cpre_rep_mark_count(rep, &mut marks) }, CpreStatus::Ok);
    assert!(marks > 0);
    let init = [CpreSite { re: 1, im: 1 }, CpreSite { re: 3, im: 0 }];
    let mut traj = ptr::null_mut();
    assert_eq!(unsafe { cpre_evolve(rep, init.as_ptr(), init.len(), 5.0, &mut traj) }, CpreStatus::Ok);
    let mut n = 0usize;
    let mut one = [CpreSite { re: 0, im: 0 }; 1];
    assert_eq!(unsafe { cpre_trajectory_sites_at(traj, 0.0, one.as_mut_ptr(), 1, &mut n) }, CpreStatus::BufferTooSmall);
    assert_eq!(n, 2);
    let mut two = [CpreSite { re: 0, im: 0 }; 2];
    assert_eq!(unsafe { cpre_trajectory_sites_at(traj, 0.0, two.as_mut_ptr(), 2, &mut n) }, CpreStatus::Ok);
    assert_eq!(two, [CpreSite { re: 1, im: 1 }, CpreSite { re: 3, im: 0 }]);
    let mut events = 0usize;
    assert_eq!(unsafe { cpre_trajectory_event_count(traj, &mut events) }, CpreStatus::Ok);
    assert!(events >= 2);
    // beyond the horizon
    let mut t2 = ptr::null_mut();
    assert_eq!(unsafe { cpre_evolve(rep, init.as_ptr(), 2, 9.0, &mut t2) }, CpreStatus::OutOfWindow);
    assert!(last_error().contains("horizon"));
    unsafe {
        cpre_trajectory_free(traj);
        cpre_rep_free(rep);
        cpre_env_free(e);
    }
}

#[test]
fn survival_through_the_abi_matches_pure_death() {
    let e = env("point(0.0)", 1);
    let init = [CpreSite { re: 0, im: 0 }, CpreSite { re: 3, im: 1 }, CpreSite { re: -2, im: 4 }];
    let mut est = CpreEstimate::default();
    let st = unsafe { cpre_survival(e, false, init.as_ptr(), 3, 2.0, 4000, 11, 2, &mut est) };
    assert_eq!(st, CpreStatus::Ok);
    let truth = 1.0 - (1.0 - (-2.0f64).exp()).powi(3);
    let se = (truth * (1.0 - truth) / 4000.0).sqrt();
    assert!((est.point - truth).abs() <= 3.0 * se, "{est:?}");
    assert!(est.lo <= est.point && est.point <= est.hi);
    assert_eq!(est.trials, 4000);
    unsafe { cpre_env_free(e) };
}

#[test]
fn header_declares_the_whole_surface() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cpre.h")).unwrap();
    for name in [
        "cpre_version",
        "cpre_last_error",
        "cpre_env_new",
        "cpre_env_import",
        "cpre_env_export",
        "cpre_env_rate",
        "cpre_env_free",
        "cpre_rep_sample",
        "cpre_rep_mark_count",
        "cpre_rep_free",
        "cpre_evolve",
        "cpre_trajectory_sites_at",
        "cpre_trajectory_event_count",
        "cpre_trajectory_free",
        "cpre_survival",
        "typedef struct CpreEnv CpreEnv",
        "CPRE_STATUS_BUFFER_TOO_SMALL = 7",
    ] {
        assert!(h.contains(name), "{name} missing from the header");
    }
}
