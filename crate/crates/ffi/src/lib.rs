//! C ABI over the `stopmean` core.
//!
//! Sources and estimators are opaque heap handles created by `*_new` and
//! released by `*_free`. Every fallible call returns a [`StopmeanStatus`];
//! on failure [`stopmean_last_error`] describes what went wrong on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use stopmean::harness::{self, ExperimentConfig};
use stopmean::metrics;
use stopmean::{
    Dyadic, DyadicValue, Error, ExactEstimator, LevelCompletion, QuantizedEstimator, SourceModel,
    SourceSpec,
};

/// Result of every fallible call. The first four match the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopmeanStatus {
    Ok = 0,
    Error = 1,
    BudgetExhausted = 2,
    InvariantViolation = 3,
    NullPointer = 4,
    InvalidArgument = 5,
    Io = 6,
    Panic = 7,
}

/// Which matching rule an estimator uses.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopmeanVariant {
    /// Match quantized blocks and average cell representatives.
    Quantized = 0,
    /// Match raw values and average raw values.
    Exact = 1,
}

/// A sample value. When `exact` is set the value is `mantissa * 2^exponent`
/// and `approx` is its nearest double (possibly 0 after underflow);
/// otherwise only `approx` is meaningful.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopmeanValue {
    pub exact: bool,
    pub mantissa: i64,
    pub exponent: i64,
    pub approx: f64,
}

/// A completed level: `lambda` is the stopping time and `estimate` is `m_level`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StopmeanCompletion {
    pub level: u64,
    pub lambda: u64,
    pub estimate: f64,
}

/// Opaque seeded source.
pub struct StopmeanSource {
    model: SourceModel,
    history: Vec<DyadicValue>,
}

/// Opaque streaming estimator.
pub enum StopmeanEstimator {
    Quantized(QuantizedEstimator),
    Exact(ExactEstimator),
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn status_of(error: &Error) -> StopmeanStatus {
    match error {
        Error::BudgetExhausted { .. } => StopmeanStatus::BudgetExhausted,
        Error::InvariantViolation(_) => StopmeanStatus::InvariantViolation,
        Error::Io(_) => StopmeanStatus::Io,
        Error::InvalidParameter(_) => StopmeanStatus::InvalidArgument,
        _ => StopmeanStatus::Error,
    }
}

struct Failure(StopmeanStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(StopmeanStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, records any error or panic, and converts it to a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> StopmeanStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => StopmeanStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {message}"));
            StopmeanStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            StopmeanStatus::InvalidArgument,
            format!("{what} is not UTF-8"),
        )
    })
}

impl From<DyadicValue> for StopmeanValue {
    fn from(v: DyadicValue) -> Self {
        match v {
            DyadicValue::Exact(d) => StopmeanValue {
                exact: true,
                mantissa: d.mantissa(),
                exponent: d.exponent(),
                approx: d.to_f64(),
            },
            DyadicValue::Inexact(x) => StopmeanValue {
                exact: false,
                mantissa: 0,
                exponent: 0,
                approx: x,
            },
        }
    }
}

fn sample(v: StopmeanValue) -> Result<DyadicValue, Failure> {
    if v.exact {
        Ok(DyadicValue::Exact(Dyadic::new(v.mantissa, v.exponent)))
    } else if v.approx.is_finite() {
        Ok(DyadicValue::real(v.approx))
    } else {
        Err(Failure(
            StopmeanStatus::InvalidArgument,
            format!("sample value must be finite, got {}", v.approx),
        ))
    }
}

impl From<&LevelCompletion> for StopmeanCompletion {
    fn from(c: &LevelCompletion) -> Self {
        StopmeanCompletion {
            level: c.level,
            lambda: c.lambda,
            estimate: c.estimate,
        }
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn stopmean_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn stopmean_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Create a source from a JSON spec such as `{"kind":"counterexample"}`.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stopmean_source_new(
    spec_json: *const c_char,
    seed: u64,
    out: *mut *mut StopmeanSource,
) -> StopmeanStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(spec_json, "spec_json")?;
        let spec: SourceSpec = serde_json::from_str(text).map_err(Error::from)?;
        let model = SourceModel::new(&spec, seed)?;
        *out = Box::into_raw(Box::new(StopmeanSource {
            model,
            history: Vec::new(),
        }));
        Ok(())
    })
}

/// Draw the next sample. The first call yields `X_0`.
///
/// # Safety
/// `source` must come from [`stopmean_source_new`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn stopmean_source_next(
    source: *mut StopmeanSource,
    out: *mut StopmeanValue,
) -> StopmeanStatus {
    guard(|| {
        let source = source.as_mut().ok_or_else(|| null("source"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let x = source.model.next();
        source.history.push(x);
        *out = x.into();
        Ok(())
    })
}

/// `E(X_{lambda+1} | X_0 ..= X_lambda)` for the samples drawn so far.
///
/// # Safety
/// `source` must come from [`stopmean_source_new`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn stopmean_source_oracle_stop(
    source: *const StopmeanSource,
    lambda: u64,
    out: *mut f64,
) -> StopmeanStatus {
    guard(|| {
        let source = source.as_ref().ok_or_else(|| null("source"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = metrics::oracle_stop(&source.model, &source.history, lambda)?;
        Ok(())
    })
}

/// # Safety
/// `source` must come from [`stopmean_source_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn stopmean_source_free(source: *mut StopmeanSource) {
    if !source.is_null() {
        drop(Box::from_raw(source));
    }
}

/// Create an estimator. `max_level == 0` means no level cap.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stopmean_estimator_new(
    variant: StopmeanVariant,
    max_level: u64,
    out: *mut *mut StopmeanEstimator,
) -> StopmeanStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let estimator = match (variant, max_level) {
            (StopmeanVariant::Quantized, 0) => {
                StopmeanEstimator::Quantized(QuantizedEstimator::new())
            }
            (StopmeanVariant::Quantized, n) => {
                StopmeanEstimator::Quantized(QuantizedEstimator::new().with_max_level(n))
            }
            (StopmeanVariant::Exact, 0) => StopmeanEstimator::Exact(ExactEstimator::new()),
            (StopmeanVariant::Exact, n) => {
                StopmeanEstimator::Exact(ExactEstimator::new().with_max_level(n))
            }
        };
        *out = Box::into_raw(Box::new(estimator));
        Ok(())
    })
}

/// Feed one sample. `*completed` is set when this sample finishes a level,
/// in which case `*completion` (if non-null) receives it.
///
/// # Safety
/// `estimator` must come from [`stopmean_estimator_new`]; `completed` must be
/// valid; `completion` may be null.
#[no_mangle]
pub unsafe extern "C" fn stopmean_estimator_step(
    estimator: *mut StopmeanEstimator,
    value: StopmeanValue,
    completed: *mut bool,
    completion: *mut StopmeanCompletion,
) -> StopmeanStatus {
    guard(|| {
        let estimator = estimator.as_mut().ok_or_else(|| null("estimator"))?;
        if completed.is_null() {
            return Err(null("completed"));
        }
        let x = sample(value)?;
        let done = match estimator {
            StopmeanEstimator::Quantized(e) => e.step(x),
            StopmeanEstimator::Exact(e) => e.step(x),
        };
        *completed = done.is_some();
        if let (Some(c), false) = (done, completion.is_null()) {
            *completion = (&c).into();
        }
        Ok(())
    })
}

/// Number of levels completed so far; 0 for a null handle.
///
/// # Safety
/// `estimator` must come from [`stopmean_estimator_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn stopmean_estimator_completed_levels(
    estimator: *const StopmeanEstimator,
) -> u64 {
    match estimator.as_ref() {
        Some(StopmeanEstimator::Quantized(e)) => e.completed_levels(),
        Some(StopmeanEstimator::Exact(e)) => e.completed_levels(),
        None => 0,
    }
}

/// Completion record for `level` (1-based).
///
/// # Safety
/// `estimator` must come from [`stopmean_estimator_new`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn stopmean_estimator_completion(
    estimator: *const StopmeanEstimator,
    level: u64,
    out: *mut StopmeanCompletion,
) -> StopmeanStatus {
    guard(|| {
        let estimator = estimator.as_ref().ok_or_else(|| null("estimator"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let completions = match estimator {
            StopmeanEstimator::Quantized(e) => e.completions(),
            StopmeanEstimator::Exact(e) => e.completions(),
        };
        let c = level
            .checked_sub(1)
            .and_then(|i| completions.get(usize::try_from(i).ok()?))
            .ok_or_else(|| {
                Failure(
                    StopmeanStatus::InvalidArgument,
                    format!("level {level} not completed"),
                )
            })?;
        *out = c.into();
        Ok(())
    })
}

/// # Safety
/// `estimator` must come from [`stopmean_estimator_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn stopmean_estimator_free(estimator: *mut StopmeanEstimator) {
    if !estimator.is_null() {
        drop(Box::from_raw(estimator));
    }
}

/// Run an experiment config (JSON text) and write its outputs to `out_dir`.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn stopmean_run_config(
    config_json: *const c_char,
    out_dir: *const c_char,
) -> StopmeanStatus {
    guard(|| {
        let config = ExperimentConfig::from_json(str_arg(config_json, "config_json")?)?;
        let out = str_arg(out_dir, "out_dir")?;
        harness::run(&config, Path::new(out))?;
        Ok(())
    })
}
