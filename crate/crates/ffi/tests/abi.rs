use std::ffi::{CStr, CString};
use std::ptr;

use kfpide_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(kf_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn model(sigma: f64, intensity: f64, law: &str) -> (*mut KfModel, KfStatus) {
    let law = CString::new(law).unwrap();
    let transform = CString::new("exp_minus_one").unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe {
        kf_model_new(
            100.0,
            0.05,
            sigma,
            intensity,
            law.as_ptr(),
            transform.as_ptr(),
            &mut out,
        )
    };
    (out, status)
}

fn contract(kind: KfContractKind, extra: f64) -> *mut KfContract {
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { kf_contract_new(kind as i32, 100.0, 1.0, 0.0, extra, &mut out) },
        KfStatus::Ok
    );
    out
}

#[test]
fn prices_through_the_c_abi() {
    let (m, status) = model(0.2, 0.0, "unit:0");
    assert_eq!(status, KfStatus::Ok);
    let c = contract(KfContractKind::Call, 0.0);
    let mut series = f64::NAN;
    let mut quad = f64::NAN;
    unsafe {
        assert_eq!(
            kf_price(m, c, KfRoute::Series as i32, &mut series),
            KfStatus::Ok
        );
        assert_eq!(
            kf_price(m, c, KfRoute::Quadrature as i32, &mut quad),
            KfStatus::Ok
        );
    }
    assert!((series - 10.450_583_572_185_568).abs() < 1e-9);
    assert!((quad - series).abs() / series < 1e-5);
    let barrier = contract(KfContractKind::DownAndOutCall, 90.0);
    let mut doc = 0.0;
    unsafe {
        assert_eq!(
            kf_price(m, barrier, KfRoute::Auto as i32, &mut doc),
            KfStatus::Ok
        );
        kf_contract_free(barrier);
        kf_contract_free(c);
        kf_model_free(m);
    }
    assert!((doc - 8.665_471_658_245_668).abs() < 1e-9);
}

#[test]
fn simulation_is_reproducible() {
    let (m, _) = model(0.2, 1.0, "normal:-0.1:0.15");
    let c = contract(KfContractKind::Call, 0.0);
    let run = || {
        let (mut e, mut se) = (0.0, 0.0);
        assert_eq!(
            unsafe { kf_simulate(m, c, 20_000, 1, 9, true, &mut e, &mut se) },
            KfStatus::Ok
        );
        (e.to_bits(), se.to_bits())
    };
    assert_eq!(run(), run());
    let (mut e, mut se) = (0.0, 0.0);
    assert_eq!(
        unsafe { kf_simulate(m, c, 1, 1, 9, true, &mut e, &mut se) },
        KfStatus::Ok
    );
    assert!(se.is_nan());
    unsafe {
        kf_contract_free(c);
        kf_model_free(m);
    }
}

#[test]
fn density_fills_arrays() {
    let (m, _) = model(0.2, 0.0, "unit:0");
    let n = 1024;
    let (mut y, mut d, mut a) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let x = 100f64.ln();
    let status = unsafe {
        kf_density(
            m,
            0.0,
            1.0,
            x - 3.0,
            x + 3.0,
            n,
            y.as_mut_ptr(),
            d.as_mut_ptr(),
            a.as_mut_ptr(),
        )
    };
    assert_eq!(status, KfStatus::Ok);
    let h = y[1] - y[0];
    let mass: f64 = d.iter().sum::<f64>() * h;
    assert!((mass - 1.0).abs() < 1e-8);
    assert!(a.iter().all(|&v| v == 0.0));
    unsafe { kf_model_free(m) };
}

#[test]
fn errors_map_to_status_codes() {
    let (m, status) = model(0.2, 1.0, "geometric:1.5");
    assert_eq!(status, KfStatus::Validation);
    assert!(m.is_null());
    assert!(last_error().contains("model.law"), "{}", last_error());

    let (m, status) = model(-0.2, 0.0, "unit:0");
    assert_eq!(status, KfStatus::Validation);
    assert!(m.is_null());

    let mut out = ptr::null_mut();
    let status = unsafe { kf_model_new(100.0, 0.05, 0.2, 0.0, ptr::null(), ptr::null(), &mut out) };
    assert_eq!(status, KfStatus::InvalidArgument);

    let mut c = ptr::null_mut();
    assert_eq!(
        unsafe { kf_contract_new(7, 100.0, 1.0, 0.0, 0.0, &mut c) },
        KfStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { kf_contract_new(0, 100.0, 1.0, 2.0, 0.0, &mut c) },
        KfStatus::Validation
    );
    assert!(last_error().contains("contract.maturity"));

    let mut p = 0.0;
    assert_eq!(
        unsafe { kf_price(ptr::null(), ptr::null(), 0, &mut p) },
        KfStatus::InvalidArgument
    );

    // Exponential jumps with the identity transform have no series route.
    let law = CString::new("exponential:5").unwrap();
    let transform = CString::new("identity").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe {
            kf_model_new(
                100.0,
                0.05,
                0.2,
                1.0,
                law.as_ptr(),
                transform.as_ptr(),
                &mut m,
            )
        },
        KfStatus::Ok
    );
    let call = contract(KfContractKind::Call, 0.0);
    assert_eq!(
        unsafe { kf_price(m, call, KfRoute::Series as i32, &mut p) },
        KfStatus::Validation
    );
    assert_eq!(
        unsafe { kf_price(m, call, KfRoute::Auto as i32, &mut p) },
        KfStatus::Ok
    );
    assert!(last_error().is_empty());
    unsafe {
        kf_contract_free(call);
        kf_model_free(m);
        kf_model_free(ptr::null_mut());
        kf_contract_free(ptr::null_mut());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(kf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
