use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use lllround::model::{gen_hypergraph_partition, gen_set_cover, serialize_instance, Instance};
use lllround_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(lll_last_error()) }.to_string_lossy().into_owned()
}

fn load(inst: &Instance) -> *mut LllInstance {
    let json = CString::new(serialize_instance(inst)).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { lll_instance_from_json(json.as_ptr(), &mut h) }, LllStatus::Ok);
    assert!(!h.is_null());
    h
}

#[test]
fn cip_round_trip() {
    let inst = load(&Instance::Cip(gen_set_cover(12, 12, 4, 2, 5).unwrap()));
    unsafe {
        assert_eq!(lll_instance_kind(inst), 0);
        let (mut m, mut n) = (0, 0);
        assert_eq!(lll_instance_dims(inst, &mut m, &mut n), LllStatus::Ok);
        assert_eq!((m, n), (12, 12));

        let mut sol = ptr::null_mut();
        assert_eq!(lll_solve_lp(inst, &mut sol), LllStatus::Ok);
        let y = lll_solution_objective(sol);
        assert!(y > 0.0);

        let mut need = 0;
        assert_eq!(lll_solution_values(sol, ptr::null_mut(), 0, &mut need), LllStatus::Ok);
        assert_eq!(need, 12);
        let mut small = [0.0; 3];
        assert_eq!(
            lll_solution_values(sol, small.as_mut_ptr(), small.len(), &mut need),
            LllStatus::BufferTooSmall
        );
        assert!(!last_error().is_empty());

        let mut r = ptr::null_mut();
        assert_eq!(lll_derandomize(inst, sol, ptr::null(), &mut r), LllStatus::Ok);
        assert!(lll_rounded_feasible(r));
        assert!(lll_rounded_value(r) >= y - 1e-9);
        assert!(lll_rounded_phi_evaluations(r) >= 1);
        let mut z = vec![0u64; 12];
        let mut w = 0;
        assert_eq!(lll_rounded_z(r, z.as_mut_ptr(), z.len(), &mut w), LllStatus::Ok);
        assert_eq!(w, 12);
        assert!(z.iter().any(|&v| v > 0));

        let mut text = ptr::null_mut();
        assert_eq!(lll_instance_to_json(inst, &mut text), LllStatus::Ok);
        assert!(CStr::from_ptr(text).to_str().unwrap().contains("\"kind\""));
        lll_string_free(text);

        // Only one of alpha/beta overridden.
        let opts = LllRoundOptions {
            alpha: 2.0,
            beta: f64::NAN,
            lambda: f64::NAN,
        };
        let mut r2 = ptr::null_mut();
        assert_eq!(lll_derandomize(inst, sol, &opts, &mut r2), LllStatus::Validation);
        assert!(r2.is_null());

        let mut lv = ptr::null_mut();
        assert_eq!(lll_las_vegas(inst, sol, 10, 0, &mut lv), LllStatus::WrongKind);

        lll_rounded_free(r);
        lll_solution_free(sol);
        lll_instance_free(inst);
    }
}

#[test]
fn mip_las_vegas() {
    let inst = load(&Instance::Mip(gen_hypergraph_partition(10, 10, 4, 2, 3).unwrap()));
    unsafe {
        assert_eq!(lll_instance_kind(inst), 1);
        let mut sol = ptr::null_mut();
        assert_eq!(lll_solve_lp(inst, &mut sol), LllStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(lll_las_vegas(inst, sol, 1000, 11, &mut r), LllStatus::Ok);
        assert!(lll_mip_result_success(r));
        assert!(lll_mip_result_value(r) <= lll_mip_result_target(r).ceil() + 1e-9);
        assert!(lll_mip_result_trials_used(r) >= 1);
        let mut slots = vec![0usize; 10];
        let mut w = 0;
        assert_eq!(lll_mip_result_slots(r, slots.as_mut_ptr(), slots.len(), &mut w), LllStatus::Ok);
        assert_eq!(w, 10);
        assert!(slots.iter().all(|&s| s < 2));
        lll_mip_result_free(r);
        lll_solution_free(sol);
        lll_instance_free(inst);
    }
}

#[test]
fn errors_and_nulls() {
    unsafe {
        let mut h = ptr::null_mut();
        let bad = CString::new("{\"kind\": \"cip\", \"m\": 1").unwrap();
        assert_eq!(lll_instance_from_json(bad.as_ptr(), &mut h), LllStatus::Parse);
        assert!(h.is_null());
        assert!(last_error().contains("parse"));
        assert_eq!(lll_instance_from_json(ptr::null(), &mut h), LllStatus::NullPointer);
        assert_eq!(lll_instance_kind(ptr::null()), -1);
        assert!(lll_solution_objective(ptr::null()).is_nan());
        lll_instance_free(ptr::null_mut());
        lll_string_free(ptr::null_mut());

        let inst = load(&Instance::Cip(gen_set_cover(4, 4, 2, 1, 0).unwrap()));
        let x = [0.0; 4];
        let mut sol = ptr::null_mut();
        assert_eq!(lll_solution_from_values(inst, x.as_ptr(), 4, &mut sol), LllStatus::Infeasible);
        assert_eq!(lll_solution_from_values(inst, x.as_ptr(), 3, &mut sol), LllStatus::Dimension);
        let ones = [1.0; 4];
        assert_eq!(lll_solution_from_values(inst, ones.as_ptr(), 4, &mut sol), LllStatus::Ok);
        assert_eq!(lll_solution_objective(sol), 4.0);
        lll_solution_free(sol);
        lll_instance_free(inst);
    }
}

#[test]
fn kernels() {
    unsafe {
        let mut g = 0.0;
        assert_eq!(lll_chernoff_g(1.0, 1.0, &mut g), LllStatus::Ok);
        assert!((g - (1.0f64.exp() / 4.0).powi(1)).abs() < 1e-12);
        assert_eq!(lll_chernoff_g(-1.0, 1.0, &mut g), LllStatus::Domain);
        let mut h = 0.0;
        assert_eq!(lll_solve_h(10.0, 0.01, &mut h), LllStatus::Ok);
        assert!(h > 0.0);
        assert_eq!(lll_g_of(3.0, 2.0, &mut g), LllStatus::Ok);
        assert!((g - (2.0 * (-1.0f64).exp()).powi(3)).abs() < 1e-12);
        assert_eq!(lll_g_of(3.0, 2.0, ptr::null_mut()), LllStatus::NullPointer);
        assert_eq!(CStr::from_ptr(lll_version()).to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/lllround.h");
    let text = std::fs::read_to_string(&header).unwrap();
    assert!(text.starts_with("#ifndef LLLROUND_H"));
    for sym in ["lll_derandomize", "lll_las_vegas", "lll_last_error", "LLL_STATUS_BUDGET"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(dir.join("tests/c/uses_header.c"))
        .status()
        .expect("a C compiler");
    assert!(status.success());
}
