//! Exercises the C ABI through its Rust signatures.

use std::ffi::{CStr, CString};
use std::ptr;

use featrans::{RunConfig, StrategyKind, StrategySpec};
use featrans_ffi::*;

fn spec_json() -> CString {
    CString::new(
        r#"{"num_classes":6,"dim":8,"train_per_class":30,"test_per_class":10,
            "centroid_scale":10.0,"noise_sigma":1.0,"anisotropy":null,"seed":3}"#,
    )
    .unwrap()
}

fn last_error() -> String {
    let p = ft_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn synth() -> *mut FtBank {
    let mut bank = ptr::null_mut();
    let spec = spec_json();
    assert_eq!(unsafe { ft_bank_synth(spec.as_ptr(), &mut bank) }, FtStatus::Ok);
    assert!(!bank.is_null());
    bank
}

#[test]
fn synth_shape_write_read() {
    let bank = synth();
    let (mut dim, mut classes) = (0usize, 0usize);
    assert_eq!(unsafe { ft_bank_shape(bank, &mut dim, &mut classes) }, FtStatus::Ok);
    assert_eq!((dim, classes), (8, 6));

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("b.fb").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ft_bank_write(bank, path.as_ptr()) }, FtStatus::Ok);
    let mut again = ptr::null_mut();
    assert_eq!(unsafe { ft_bank_read(path.as_ptr(), &mut again) }, FtStatus::Ok);
    let (mut d2, mut c2) = (0usize, 0usize);
    assert_eq!(unsafe { ft_bank_shape(again, &mut d2, &mut c2) }, FtStatus::Ok);
    assert_eq!((d2, c2), (8, 6));
    unsafe {
        ft_bank_free(again);
        ft_bank_free(bank);
    }
}

#[test]
fn run_returns_report_json() {
    let bank = synth();
    let cfg = RunConfig::new(2, 2, StrategySpec::new(StrategyKind::Kth, 20), 1);
    let cfg = CString::new(serde_json::to_string(&cfg).unwrap()).unwrap();
    for upper in [0, 1] {
        let mut out = ptr::null_mut();
        assert_eq!(unsafe { ft_run(bank, cfg.as_ptr(), upper, &mut out) }, FtStatus::Ok);
        let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
        unsafe { ft_string_free(out) };
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["per_state"].as_array().unwrap().len(), 3);
        let expected = if upper == 0 { "kth1" } else { "upper" };
        assert_eq!(v["method"], expected);
    }
    unsafe { ft_bank_free(bank) };
}

#[test]
fn error_codes() {
    let mut bank = ptr::null_mut();
    assert_eq!(unsafe { ft_bank_read(ptr::null(), &mut bank) }, FtStatus::NullArgument);
    assert!(last_error().contains("path"));

    let missing = CString::new("/nonexistent/dir/x.fb").unwrap();
    assert_eq!(unsafe { ft_bank_read(missing.as_ptr(), &mut bank) }, FtStatus::Io);

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.fb");
    std::fs::write(&junk, b"NOTABANK....").unwrap();
    let junk = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ft_bank_read(junk.as_ptr(), &mut bank) }, FtStatus::Format);
    assert!(bank.is_null());

    let bad = CString::new("{not json").unwrap();
    assert_eq!(unsafe { ft_bank_synth(bad.as_ptr(), &mut bank) }, FtStatus::Json);

    let b = synth();
    let cfg = RunConfig::new(5, 2, StrategySpec::new(StrategyKind::Kth, 20), 1);
    let cfg = CString::new(serde_json::to_string(&cfg).unwrap()).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { ft_run(b, cfg.as_ptr(), 0, &mut out) },
        FtStatus::InvalidArgument
    );
    assert!(out.is_null());
    assert!(last_error().contains("split"));
    assert_eq!(
        unsafe { ft_run(ptr::null(), cfg.as_ptr(), 0, &mut out) },
        FtStatus::NullArgument
    );
    unsafe {
        ft_bank_free(b);
        ft_bank_free(ptr::null_mut());
        ft_string_free(ptr::null_mut());
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(ft_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/featrans.h")).unwrap();
    for name in [
        "ft_last_error",
        "ft_version",
        "ft_bank_read",
        "ft_bank_synth",
        "ft_bank_write",
        "ft_bank_shape",
        "ft_bank_free",
        "ft_run",
        "ft_string_free",
        "typedef struct FtBank FtBank",
        "FT_STATUS_OK = 0",
        "FT_STATUS_PANIC = 7",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
