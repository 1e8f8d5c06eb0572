//! C ABI over the allocation engine.
//!
//! Every fallible function returns a status code (`CONDALLOC_OK` on success)
//! and, on failure, leaves a message retrievable with
//! [`condalloc_last_error`]. Models are opaque handles: load with
//! [`condalloc_model_load_json`] or [`condalloc_model_load_file`], release
//! with [`condalloc_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use condalloc::error::{Error, ErrorClass};
use condalloc::ratios::{self, RatioKind, RatioSpec};
use condalloc::training::{predict_weights, TrainedModel};

pub const CONDALLOC_OK: i32 = 0;
/// Null pointer, bad UTF-8 or a buffer of the wrong length.
pub const CONDALLOC_ERR_ARGUMENT: i32 = 1;
pub const CONDALLOC_ERR_CONFIG: i32 = 2;
pub const CONDALLOC_ERR_DATA: i32 = 3;
pub const CONDALLOC_ERR_NUMERIC: i32 = 4;
/// A Rust panic was caught at the boundary.
pub const CONDALLOC_ERR_INTERNAL: i32 = 5;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.class() {
            ErrorClass::Config => CONDALLOC_ERR_CONFIG,
            ErrorClass::Data => CONDALLOC_ERR_DATA,
            ErrorClass::Numeric => CONDALLOC_ERR_NUMERIC,
        };
        Failure(code, e.to_string())
    }
}

fn arg_error(msg: impl Into<String>) -> Failure {
    Failure(CONDALLOC_ERR_ARGUMENT, msg.into())
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CONDALLOC_OK,
        Ok(Err(Failure(code, msg))) => {
            set_last_error(msg);
            code
        }
        Err(_) => {
            set_last_error("internal panic".into());
            CONDALLOC_ERR_INTERNAL
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(arg_error(format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| arg_error(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(arg_error(format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(arg_error(format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Opaque trained model.
pub struct CondallocModel {
    inner: TrainedModel,
}

/// Message of the last failure on this thread, or null if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn condalloc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

fn store_model(model: TrainedModel, out: *mut *mut CondallocModel) {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(CondallocModel { inner: model })) };
}

/// Parse a model from its JSON text (as written by `condalloc train`).
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn condalloc_model_load_json(json: *const c_char, out: *mut *mut CondallocModel) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(arg_error("out is null"));
        }
        let text = str_arg(json, "json")?;
        store_model(TrainedModel::from_json(text)?, out);
        Ok(())
    })
}

/// Read and parse a model JSON file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn condalloc_model_load_file(path: *const c_char, out: *mut *mut CondallocModel) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(arg_error("out is null"));
        }
        let path = str_arg(path, "path")?;
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })?;
        store_model(TrainedModel::from_json(&text)?, out);
        Ok(())
    })
}

/// Release a model. Null is ignored.
///
/// # Safety
/// `model` must come from a load function and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn condalloc_model_free(model: *mut CondallocModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of state variables the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn condalloc_model_inputs(model: *const CondallocModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.params.shape.inputs)
}

/// Number of assets the model allocates over, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn condalloc_model_assets(model: *const CondallocModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.params.shape.assets)
}

/// Portfolio weights for one raw (unstandardized) state vector.
///
/// `renormalized` may be null; otherwise it receives 1 when the weights were
/// rescaled to sum to one.
///
/// # Safety
/// `state` must hold `n_state` values and `weights` room for `n_assets`.
#[no_mangle]
pub unsafe extern "C" fn condalloc_model_predict(
    model: *const CondallocModel,
    state: *const f64,
    n_state: usize,
    weights: *mut f64,
    n_assets: usize,
    renormalized: *mut u8,
) -> i32 {
    guard(|| {
        let model = &model.as_ref().ok_or_else(|| arg_error("model is null"))?.inner;
        let shape = model.params.shape;
        if n_state != shape.inputs || n_assets != shape.assets {
            return Err(arg_error(format!(
                "model takes {} states and yields {} weights, got buffers of {} and {}",
                shape.inputs, shape.assets, n_state, n_assets
            )));
        }
        let z = slice_arg(state, n_state, "state")?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("state contains a non-finite value".into()).into());
        }
        let out = slice_out(weights, n_assets, "weights")?;
        let p = predict_weights(model, z);
        out.copy_from_slice(&p.weights);
        if !renormalized.is_null() {
            *renormalized = p.renormalized as u8;
        }
        Ok(())
    })
}

unsafe fn spec_arg(kind: *const c_char, alpha: f64, beta: f64) -> Result<RatioSpec, Failure> {
    let kind: RatioKind = str_arg(kind, "kind")?.parse()?;
    Ok(RatioSpec::with_levels(kind, alpha, beta)?)
}

/// Evaluate a performance ratio on `d` returns.
///
/// `kind` is one of `sharpe`, `mad`, `gini`, `minimax`, `cvar`, `rachev`;
/// `alpha` and `beta` are the tail levels (only read by `cvar` and `rachev`,
/// but must lie in (0, 1)).
///
/// # Safety
/// `kind` must be a nul-terminated string, `returns` must hold `d` values and
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn condalloc_ratio_evaluate(
    kind: *const c_char,
    alpha: f64,
    beta: f64,
    returns: *const f64,
    d: usize,
    value: *mut f64,
) -> i32 {
    guard(|| {
        let spec = spec_arg(kind, alpha, beta)?;
        let r = slice_arg(returns, d, "returns")?;
        if value.is_null() {
            return Err(arg_error("value is null"));
        }
        *value = ratios::evaluate(&spec, r)?.value;
        Ok(())
    })
}

/// Gradient of a performance ratio with respect to each of the `d` returns.
///
/// # Safety
/// As [`condalloc_ratio_evaluate`]; `gradient` must have room for `d` values.
#[no_mangle]
pub unsafe extern "C" fn condalloc_ratio_gradient(
    kind: *const c_char,
    alpha: f64,
    beta: f64,
    returns: *const f64,
    d: usize,
    gradient: *mut f64,
) -> i32 {
    guard(|| {
        let spec = spec_arg(kind, alpha, beta)?;
        let r = slice_arg(returns, d, "returns")?;
        let out = slice_out(gradient, d, "gradient")?;
        out.copy_from_slice(&ratios::gradient_wrt_returns(&spec, r)?);
        Ok(())
    })
}
