//! C ABI over the featrans engine.
//!
//! Banks are passed around as opaque `FtBank` handles. Configurations and
//! reports cross the boundary as UTF-8 JSON. Every call returns an
//! [`FtStatus`]; on failure the message is available from
//! [`ft_last_error`] on the same thread until the next failing call.
//! Strings returned through out-pointers are owned by the caller and must be
//! released with [`ft_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use featrans::bankio::{read_bank, synth_generate, write_bank};
use featrans::protocol::{run_incremental, run_upper_bound};
use featrans::report::to_canonical_json;
use featrans::{BankAccess, Error, FeatureBank, RunConfig, SyntheticSpec};

/// Result of every exported call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Format = 5,
    Json = 6,
    Panic = 7,
}

/// Opaque feature bank handle.
pub struct FtBank {
    inner: FeatureBank,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> FtStatus {
    match err {
        Error::Io(_) => FtStatus::Io,
        Error::NotABank | Error::Corrupt(_) | Error::UnsupportedVersion(_) | Error::Csv(_) => FtStatus::Format,
        Error::Json(_) => FtStatus::Json,
        _ => FtStatus::InvalidArgument,
    }
}

enum Fail {
    Status(FtStatus, String),
    Engine(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Engine(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FtStatus::Ok,
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Fail::Engine(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            FtStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Status(FtStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Status(FtStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn bank_arg<'a>(p: *const FtBank) -> Result<&'a FtBank, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail::Status(FtStatus::NullArgument, "bank is null".into()))
}

fn check_out<T>(p: *mut T) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Status(FtStatus::NullArgument, "output pointer is null".into()));
    }
    Ok(())
}

fn into_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail::Status(FtStatus::InvalidArgument, "output contains NUL".into()))
}

fn json_err(e: serde_json::Error) -> Fail {
    Fail::Status(FtStatus::Json, e.to_string())
}

/// Message of the last failing call on this thread, or NULL. Valid until the
/// next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn ft_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Crate version as a static string.
#[no_mangle]
pub extern "C" fn ft_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a FEATBANK file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_bank_read(path: *const c_char, out: *mut *mut FtBank) -> FtStatus {
    guard(|| {
        check_out(out)?;
        let path = str_arg(path, "path")?;
        let inner = read_bank(path)?;
        *out = Box::into_raw(Box::new(FtBank { inner }));
        Ok(())
    })
}

/// Builds a synthetic bank from a JSON generator spec.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_bank_synth(spec_json: *const c_char, out: *mut *mut FtBank) -> FtStatus {
    guard(|| {
        check_out(out)?;
        let spec: SyntheticSpec = serde_json::from_str(str_arg(spec_json, "spec_json")?).map_err(json_err)?;
        let inner = synth_generate(&spec)?;
        *out = Box::into_raw(Box::new(FtBank { inner }));
        Ok(())
    })
}

/// Writes a bank as a FEATBANK file.
///
/// # Safety
/// `bank` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ft_bank_write(bank: *const FtBank, path: *const c_char) -> FtStatus {
    guard(|| {
        let bank = bank_arg(bank)?;
        write_bank(&bank.inner, str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Feature dimension and class count of a bank.
///
/// # Safety
/// `bank` must come from this library; the out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ft_bank_shape(bank: *const FtBank, dim: *mut usize, classes: *mut usize) -> FtStatus {
    guard(|| {
        let bank = bank_arg(bank)?;
        check_out(dim)?;
        check_out(classes)?;
        *dim = bank.inner.dim();
        *classes = bank.inner.num_classes();
        Ok(())
    })
}

/// Releases a bank. NULL is ignored.
///
/// # Safety
/// `bank` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ft_bank_free(bank: *mut FtBank) {
    if !bank.is_null() {
        drop(Box::from_raw(bank));
    }
}

/// Runs the incremental protocol with a JSON run configuration and returns
/// the report as canonical JSON. A nonzero `upper` runs the real-feature
/// reference instead.
///
/// # Safety
/// `bank` must come from this library; `config_json` must be NUL-terminated;
/// `out_json` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_run(
    bank: *const FtBank,
    config_json: *const c_char,
    upper: i32,
    out_json: *mut *mut c_char,
) -> FtStatus {
    guard(|| {
        check_out(out_json)?;
        let bank = bank_arg(bank)?;
        let config: RunConfig = serde_json::from_str(str_arg(config_json, "config_json")?).map_err(json_err)?;
        let report = if upper != 0 {
            run_upper_bound(&bank.inner, &config)?
        } else {
            run_incremental(&bank.inner, &config)?
        };
        *out_json = into_c_string(to_canonical_json(&report)?)?;
        Ok(())
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ft_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
