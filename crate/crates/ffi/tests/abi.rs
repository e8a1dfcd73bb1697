use std::ffi::CStr;
use std::ptr;

use conical_lab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cl_last_error_message()) }.to_string_lossy().into_owned()
}

fn identity_setup(points: usize) -> *mut ClSetup {
    let mut s = ptr::null_mut();
    let st = unsafe { cl_setup_new(1, points, 1.0, 32, 1, ClCoefficients::Identity, 0, 1.0, 1.0, &mut s) };
    assert_eq!(st, ClStatus::Ok, "{}", last_error());
    assert!(!s.is_null());
    s
}

#[test]
fn version_is_nonempty() {
    let v = unsafe { CStr::from_ptr(cl_version()) };
    assert!(!v.to_bytes().is_empty());
}

#[test]
fn setup_roundtrip_and_eigenvalues() {
    let s = identity_setup(16);
    let n = unsafe { cl_setup_num_sites(s) };
    assert_eq!(n, 16);
    let mut lam = vec![0.0; n];
    assert_eq!(unsafe { cl_setup_eigenvalues(s, lam.as_mut_ptr(), n) }, ClStatus::Ok);
    assert!(lam[0].abs() < 1e-9);
    assert!(lam.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    unsafe { cl_setup_free(s) };
}

#[test]
fn semigroup_preserves_constants() {
    let s = identity_setup(16);
    let input = vec![2.5; 16];
    let mut output = vec![0.0; 16];
    let st = unsafe { cl_setup_semigroup_apply(s, 0.01, input.as_ptr(), output.as_mut_ptr(), 16) };
    assert_eq!(st, ClStatus::Ok);
    for v in output {
        assert!((v - 2.5).abs() < 1e-10);
    }
    unsafe { cl_setup_free(s) };
}

#[test]
fn length_mismatch_reports_grid_error() {
    let s = identity_setup(16);
    let mut lam = vec![0.0; 3];
    let st = unsafe { cl_setup_eigenvalues(s, lam.as_mut_ptr(), 3) };
    assert_eq!(st, ClStatus::GridMismatch);
    assert!(last_error().contains("length"));
    unsafe { cl_setup_free(s) };
}

#[test]
fn null_pointers_are_reported() {
    let st = unsafe { cl_setup_eigenvalues(ptr::null(), ptr::null_mut(), 0) };
    assert_eq!(st, ClStatus::NullPointer);
    assert!(last_error().contains("setup"));
    assert_eq!(unsafe { cl_setup_num_sites(ptr::null()) }, 0);
    unsafe { cl_setup_free(ptr::null_mut()) };
}

#[test]
fn invalid_coefficients_are_rejected() {
    let mut s = ptr::null_mut();
    let st = unsafe { cl_setup_new(1, 16, 1.0, 32, 1, ClCoefficients::Checkerboard, 3, 2.0, 1.0, &mut s) };
    assert_ne!(st, ClStatus::Ok);
    assert!(s.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn conical_ratio_is_deterministic() {
    let s = identity_setup(16);
    let mut a = ClRatio::default();
    let mut b = ClRatio::default();
    unsafe {
        assert_eq!(cl_conical_ratio(s, 2.0, 0.5, 1.0, ClFamily::Adapted, 0.0, 0, 20, 7, &mut a), ClStatus::Ok);
        assert_eq!(cl_conical_ratio(s, 2.0, 0.5, 1.0, ClFamily::Adapted, 0.0, 0, 20, 7, &mut b), ClStatus::Ok);
        cl_setup_free(s);
    }
    assert_eq!(a, b);
    assert!(a.ratio.is_finite() && a.ratio > 0.0);
}

#[test]
fn zero_family_is_degenerate() {
    let s = identity_setup(16);
    let mut r = ClRatio::default();
    let st = unsafe { cl_conical_ratio(s, 2.0, 0.5, 1.0, ClFamily::Zero, 0.0, 0, 5, 1, &mut r) };
    assert_eq!(st, ClStatus::Degenerate);
    unsafe { cl_setup_free(s) };
}

#[test]
fn tent_norm_is_homogeneous() {
    let (points, nodes) = (8, 6);
    let len = points * nodes;
    let values: Vec<f64> = (0..len).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
    let doubled: Vec<f64> = values.iter().map(|v| 2.0 * v).collect();
    let (mut a, mut b) = (0.0, 0.0);
    unsafe {
        assert_eq!(
            cl_tent_norm(1, points, 1.0, 0.01, 0.25, nodes, 1, values.as_ptr(), len, 2.0, 0.5, 1.0, &mut a),
            ClStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(
            cl_tent_norm(1, points, 1.0, 0.01, 0.25, nodes, 1, doubled.as_ptr(), len, 2.0, 0.5, 1.0, &mut b),
            ClStatus::Ok
        );
    }
    assert!(a > 0.0);
    assert!((b - 2.0 * a).abs() <= 1e-12 * b);
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/conical_lab.h")).unwrap();
    for f in [
        "cl_last_error_message",
        "cl_version",
        "cl_setup_new",
        "cl_setup_free",
        "cl_setup_num_sites",
        "cl_setup_eigenvalues",
        "cl_setup_semigroup_apply",
        "cl_conical_ratio",
        "cl_tent_norm",
        "CL_STATUS_NULL_POINTER",
    ] {
        assert!(header.contains(f), "missing {f}");
    }
}
