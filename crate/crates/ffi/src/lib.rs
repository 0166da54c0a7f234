//! C ABI for the shapline library.
//!
//! Every entry point is panic-safe, returns a [`ShaplineStatus`], and
//! reports failure details through a thread-local message retrievable with
//! [`shapline_last_error_message`]. Heap objects cross the boundary as
//! opaque pointers with explicit `_free` functions; numeric buffers are
//! caller-allocated row-major `double` arrays.
//!
//! The C header is generated by the build script into
//! `include/shapline.h` (a committed copy ships with the crate).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use shapline::explain::{
    kernel_shap, BackgroundProvenance, BackgroundSet, ShapConfig, ShapMode,
};
use shapline::linalg::Matrix;
use shapline::model::MLPModel;
use shapline::Error;

/// Result status of every fallible FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShaplineStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument was structurally invalid (dimensions, ranges, content).
    InvalidArgument = 2,
    /// The filesystem operation failed.
    IoError = 3,
    /// The computation itself failed.
    ComputeError = 4,
    /// A panic was caught at the FFI boundary (a bug; please report).
    InternalError = 5,
}

/// Opaque handle to a loaded classifier.
pub struct ShaplineModel {
    inner: MLPModel,
}

/// Opaque handle to a background (reference) row set for explanations.
pub struct ShaplineBackground {
    inner: BackgroundSet,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> =
        RefCell::new(CString::new("").expect("empty string has no NUL"));
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', "?");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() =
            CString::new(sanitized).expect("NUL bytes were replaced");
    });
}

fn status_of(error: &Error) -> ShaplineStatus {
    match error {
        Error::Io { .. } => ShaplineStatus::IoError,
        Error::Csv { .. }
        | Error::Schema(_)
        | Error::Data(_)
        | Error::Dimension(_)
        | Error::Config(_) => ShaplineStatus::InvalidArgument,
        Error::Train(_) | Error::Explain(_) | Error::Artifact(_) | Error::Stage { .. } => {
            ShaplineStatus::ComputeError
        }
    }
}

fn fail(error: &Error) -> ShaplineStatus {
    set_last_error(&error.to_string());
    status_of(error)
}

fn null_argument(name: &str) -> ShaplineStatus {
    set_last_error(&format!("argument `{name}` must not be null"));
    ShaplineStatus::NullArgument
}

/// Runs `f` with panics converted to `InternalError`.
fn guarded(f: impl FnOnce() -> ShaplineStatus) -> ShaplineStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic at the FFI boundary");
            ShaplineStatus::InternalError
        }
    }
}

/// # Safety
/// `path` must be a valid NUL-terminated string.
unsafe fn path_from(path: *const c_char) -> Result<&'static Path, ShaplineStatus> {
    match CStr::from_ptr(path).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_last_error("path is not valid UTF-8");
            Err(ShaplineStatus::InvalidArgument)
        }
    }
}

/// Copies a caller-supplied row-major buffer into a matrix.
///
/// # Safety
/// `data` must point to `n_rows * n_cols` readable doubles.
unsafe fn matrix_from(
    data: *const f64,
    n_rows: usize,
    n_cols: usize,
) -> Result<Matrix, ShaplineStatus> {
    if n_rows == 0 || n_cols == 0 {
        set_last_error(&format!("matrix must be non-empty, got {n_rows}x{n_cols}"));
        return Err(ShaplineStatus::InvalidArgument);
    }
    let values = std::slice::from_raw_parts(data, n_rows * n_cols);
    Matrix::from_vec(n_rows, n_cols, values.to_vec()).map_err(|e| fail(&e))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn shapline_version() -> *const c_char {
    // Embedded with an explicit NUL so no allocation is needed.
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the calling thread's most recent failure. The pointer
/// stays valid until the next failing call on the same thread. Empty when
/// no call has failed yet.
#[no_mangle]
pub extern "C" fn shapline_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Loads a model saved by the library. On success stores an owned handle in
/// `*out_model`; release it with [`shapline_model_free`].
///
/// # Safety
/// `path` must be NUL-terminated; `out_model` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shapline_model_load(
    path: *const c_char,
    out_model: *mut *mut ShaplineModel,
) -> ShaplineStatus {
    guarded(|| {
        if path.is_null() {
            return null_argument("path");
        }
        if out_model.is_null() {
            return null_argument("out_model");
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match MLPModel::load(path) {
            Ok(inner) => {
                *out_model = Box::into_raw(Box::new(ShaplineModel { inner }));
                ShaplineStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Saves a model to `path` in the library's binary format.
///
/// # Safety
/// `model` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn shapline_model_save(
    model: *const ShaplineModel,
    path: *const c_char,
) -> ShaplineStatus {
    guarded(|| {
        if model.is_null() {
            return null_argument("model");
        }
        if path.is_null() {
            return null_argument("path");
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match (*model).inner.save(path) {
            Ok(()) => ShaplineStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Number of input features the model expects; 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn shapline_model_input_dim(model: *const ShaplineModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).inner.input_dim
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must have come from this library and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn shapline_model_free(model: *mut ShaplineModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Classifies `n_rows` row-major samples, writing one probability of the
/// positive class per row into `out_proba`.
///
/// # Safety
/// `x` must point to `n_rows * n_cols` doubles and `out_proba` to `n_rows`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn shapline_predict_proba(
    model: *const ShaplineModel,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_proba: *mut f64,
) -> ShaplineStatus {
    guarded(|| {
        if model.is_null() {
            return null_argument("model");
        }
        if x.is_null() {
            return null_argument("x");
        }
        if out_proba.is_null() {
            return null_argument("out_proba");
        }
        let matrix = match matrix_from(x, n_rows, n_cols) {
            Ok(m) => m,
            Err(status) => return status,
        };
        match (*model).inner.predict_proba(&matrix) {
            Ok(proba) => {
                ptr::copy_nonoverlapping(proba.as_ptr(), out_proba, proba.len());
                ShaplineStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Wraps `n_rows` row-major reference rows as a background set, verbatim.
/// Release the handle with [`shapline_background_free`].
///
/// # Safety
/// `data` must point to `n_rows * n_cols` doubles; `out_background` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shapline_background_from_data(
    data: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_background: *mut *mut ShaplineBackground,
) -> ShaplineStatus {
    guarded(|| {
        if data.is_null() {
            return null_argument("data");
        }
        if out_background.is_null() {
            return null_argument("out_background");
        }
        let matrix = match matrix_from(data, n_rows, n_cols) {
            Ok(m) => m,
            Err(status) => return status,
        };
        match BackgroundSet::from_matrix(matrix, BackgroundProvenance::File) {
            Ok(inner) => {
                *out_background = Box::into_raw(Box::new(ShaplineBackground { inner }));
                ShaplineStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Summarizes `n_rows` row-major samples into `k` background rows by
/// k-means (deterministic per seed). Release the handle with
/// [`shapline_background_free`].
///
/// # Safety
/// `data` must point to `n_rows * n_cols` doubles; `out_background` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shapline_background_kmeans(
    data: *const f64,
    n_rows: usize,
    n_cols: usize,
    k: usize,
    seed: u64,
    out_background: *mut *mut ShaplineBackground,
) -> ShaplineStatus {
    guarded(|| {
        if data.is_null() {
            return null_argument("data");
        }
        if out_background.is_null() {
            return null_argument("out_background");
        }
        let matrix = match matrix_from(data, n_rows, n_cols) {
            Ok(m) => m,
            Err(status) => return status,
        };
        let centroids = match shapline::explain::kmeans(&matrix, k, seed) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        match BackgroundSet::from_matrix(centroids, BackgroundProvenance::Kmeans) {
            Ok(inner) => {
                *out_background = Box::into_raw(Box::new(ShaplineBackground { inner }));
                ShaplineStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Rows in a background set; 0 for a null handle.
///
/// # Safety
/// `background` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn shapline_background_rows(
    background: *const ShaplineBackground,
) -> usize {
    if background.is_null() {
        return 0;
    }
    (*background).inner.k()
}

/// Releases a background handle. Null is ignored.
///
/// # Safety
/// `background` must have come from this library and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn shapline_background_free(background: *mut ShaplineBackground) {
    if !background.is_null() {
        drop(Box::from_raw(background));
    }
}

/// Explains one sample: writes the `n_cols` per-feature attributions to
/// `out_phi` and the base value (expected model output over the background
/// rows) to `out_phi0`. Attributions satisfy
/// `phi0 + sum(phi) = model(x)` up to solver tolerance.
///
/// `coalition_budget` caps evaluated feature coalitions in sampled mode;
/// pass 0 for the default (`2 * n_cols + 2048`). Nonzero `exact` switches
/// to brute-force enumeration (requires `n_cols <= 20`).
///
/// # Safety
/// `x` and `out_phi` must point to `n_cols` doubles (readable / writable
/// respectively); `out_phi0` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shapline_explain(
    model: *const ShaplineModel,
    background: *const ShaplineBackground,
    x: *const f64,
    n_cols: usize,
    coalition_budget: usize,
    exact: u8,
    seed: u64,
    out_phi: *mut f64,
    out_phi0: *mut f64,
) -> ShaplineStatus {
    guarded(|| {
        if model.is_null() {
            return null_argument("model");
        }
        if background.is_null() {
            return null_argument("background");
        }
        if x.is_null() {
            return null_argument("x");
        }
        if out_phi.is_null() {
            return null_argument("out_phi");
        }
        if out_phi0.is_null() {
            return null_argument("out_phi0");
        }
        if n_cols == 0 {
            set_last_error("n_cols must be >= 1");
            return ShaplineStatus::InvalidArgument;
        }
        let sample = std::slice::from_raw_parts(x, n_cols);
        let cfg = ShapConfig {
            coalition_budget: (coalition_budget > 0).then_some(coalition_budget),
            seed,
            mode: if exact != 0 {
                ShapMode::Exact
            } else {
                ShapMode::Sampled
            },
        };
        match kernel_shap(&(*model).inner, sample, &(*background).inner, &cfg) {
            Ok(explanation) => {
                ptr::copy_nonoverlapping(explanation.phi.as_ptr(), out_phi, n_cols);
                *out_phi0 = explanation.phi0;
                ShaplineStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
