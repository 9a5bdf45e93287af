//! C ABI over `kfpide`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free`. Every fallible call returns a [`KfStatus`]; on failure
//! [`kf_last_error_message`] describes the error for the calling thread.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use kfpide::density::{log_price_density, SeriesTruncation};
use kfpide::laws::{JumpLaw, JumpTransform};
use kfpide::mc::{price_mc, McConfig};
use kfpide::model::{ContractKind, LevyModel, OptionContract};
use kfpide::pricing::{price, GridSpec, PricingSettings, Route};
use kfpide::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KfStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or an out-of-range enum value.
    InvalidArgument = 1,
    /// Parameter, domain or capability error.
    Validation = 2,
    /// Numerical consistency, coverage, convergence or resource error.
    Numerical = 3,
    Io = 4,
    /// A panic was caught at the boundary.
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KfContractKind {
    Call = 0,
    Put = 1,
    /// Cash-or-nothing call; `extra` is the payout.
    Digital = 2,
    /// Down-and-out call; `extra` is the barrier.
    DownAndOutCall = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KfRoute {
    Auto = 0,
    Series = 1,
    Quadrature = 2,
}

/// Opaque model handle.
pub struct KfModel(LevyModel);

/// Opaque contract handle.
pub struct KfContract(OptionContract);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> KfStatus {
    match e.exit_code() {
        2 => KfStatus::Validation,
        3 => KfStatus::Numerical,
        4 => KfStatus::Io,
        _ => KfStatus::Internal,
    }
}

fn invalid(message: &str) -> KfStatus {
    set_error(message);
    KfStatus::InvalidArgument
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), KfStatus>) -> KfStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KfStatus::Ok,
        Ok(Err(status)) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal error: {msg}"));
            KfStatus::Internal
        }
    }
}

fn lift<T>(r: kfpide::Result<T>) -> Result<T, KfStatus> {
    r.map_err(|e| {
        set_error(&e.to_string());
        status_of(&e)
    })
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, KfStatus> {
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, KfStatus> {
    p.as_ref()
        .ok_or_else(|| invalid(&format!("{what} is null")))
}

unsafe fn write<T>(p: *mut T, v: T, what: &str) -> Result<(), KfStatus> {
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    p.write(v);
    Ok(())
}

/// Creates a model. `law` uses the `kind:params` syntax (e.g.
/// `normal:-0.1:0.15`); `transform` is `identity` or `exp_minus_one`.
///
/// # Safety
/// `law` and `transform` must be null or NUL-terminated strings; `out` must
/// be null or valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn kf_model_new(
    spot: f64,
    rate: f64,
    sigma: f64,
    intensity_q: f64,
    law: *const c_char,
    transform: *const c_char,
    out: *mut *mut KfModel,
) -> KfStatus {
    guard(|| {
        let law: JumpLaw = lift(text(law, "law")?.parse())?;
        let transform: JumpTransform = lift(text(transform, "transform")?.parse())?;
        let model = lift(LevyModel::new(
            spot,
            rate,
            sigma,
            intensity_q,
            law,
            transform,
        ))?;
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        write(out, Box::into_raw(Box::new(KfModel(model))), "out")
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must be null or a pointer from [`kf_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kf_model_free(model: *mut KfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Creates a contract of kind `kind` (a [`KfContractKind`] value).
/// `extra` is the payout of a digital or the barrier of a down-and-out
/// call and is ignored otherwise.
///
/// # Safety
/// `out` must be null or valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn kf_contract_new(
    kind: c_int,
    strike: f64,
    maturity: f64,
    valuation_time: f64,
    extra: f64,
    out: *mut *mut KfContract,
) -> KfStatus {
    guard(|| {
        let kind = match kind {
            0 => ContractKind::EuropeanCall,
            1 => ContractKind::EuropeanPut,
            2 => ContractKind::CashOrNothingCall { payout: extra },
            3 => ContractKind::DownAndOutCall { barrier: extra },
            other => return Err(invalid(&format!("unknown contract kind {other}"))),
        };
        let contract = lift(OptionContract::new(kind, strike, maturity, valuation_time))?;
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        write(out, Box::into_raw(Box::new(KfContract(contract))), "out")
    })
}

/// Releases a contract; null is ignored.
///
/// # Safety
/// `contract` must be null or a pointer from [`kf_contract_new`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn kf_contract_free(contract: *mut KfContract) {
    if !contract.is_null() {
        drop(Box::from_raw(contract));
    }
}

/// Prices `contract` under `model` with default numerics along `route`
/// (a [`KfRoute`] value).
///
/// # Safety
/// Handles must be live; `out_price` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn kf_price(
    model: *const KfModel,
    contract: *const KfContract,
    route: c_int,
    out_price: *mut f64,
) -> KfStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let c = handle(contract, "contract")?;
        let route = match route {
            0 => Route::Auto,
            1 => Route::Series,
            2 => Route::Quadrature,
            other => return Err(invalid(&format!("unknown route {other}"))),
        };
        let settings = PricingSettings {
            route,
            ..PricingSettings::default()
        };
        let report = lift(price(&m.0, &c.0, &settings))?;
        write(out_price, report.price, "out_price")
    })
}

/// Monte Carlo estimate and standard error (NaN for one path).
///
/// # Safety
/// Handles must be live; output pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn kf_simulate(
    model: *const KfModel,
    contract: *const KfContract,
    n_paths: u64,
    n_steps: u64,
    seed: u64,
    bridge_correction: bool,
    out_estimate: *mut f64,
    out_std_error: *mut f64,
) -> KfStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let c = handle(contract, "contract")?;
        let mut cfg = lift(McConfig::new(n_paths as usize, n_steps as usize, seed))?;
        cfg.bridge_correction = bridge_correction;
        let e = lift(price_mc(&m.0, &c.0, &cfg))?;
        write(out_estimate, e.estimate, "out_estimate")?;
        write(out_std_error, e.std_error, "out_std_error")
    })
}

/// Density of `ln S_t` given `ln S_s = ln S` on the grid
/// `[x_min, x_max)` with `n_points` nodes (a power of two). Fills the node
/// locations, the continuous density and the atom mass per node.
///
/// # Safety
/// Each output array must hold `n_points` doubles.
#[no_mangle]
pub unsafe extern "C" fn kf_density(
    model: *const KfModel,
    s: f64,
    t: f64,
    x_min: f64,
    x_max: f64,
    n_points: usize,
    out_y: *mut f64,
    out_density: *mut f64,
    out_atom_mass: *mut f64,
) -> KfStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if out_y.is_null() || out_density.is_null() || out_atom_mass.is_null() {
            return Err(invalid("output array is null"));
        }
        let settings = PricingSettings {
            grid: GridSpec::Bounds { x_min, x_max },
            n_points,
            ..PricingSettings::default()
        };
        let grid = lift(settings.grid_for(&m.0, t - s))?;
        let d = lift(log_price_density(
            &m.0,
            s,
            t,
            &grid,
            &SeriesTruncation::default(),
        ))?;
        let atoms = d.atom_mass();
        for k in 0..n_points {
            out_y.add(k).write(grid.node(k));
            out_density.add(k).write(d.continuous()[k]);
            out_atom_mass.add(k).write(atoms[k]);
        }
        Ok(())
    })
}

/// Message of the last failed call on this thread, or an empty string.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn kf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kf_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}
