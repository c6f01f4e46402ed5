//! C ABI over the featurizer, descriptors and trained models.
//!
//! Every fallible function returns a [`MiattnStatus`]; on failure the message is
//! available from [`miattn_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use miattn::descriptors::{apply_scaler, compute_descriptors, DESCRIPTOR_COUNT};
use miattn::featurize::{featurize, FEATURE_COLS, MAX_ROWS};
use miattn::model::{load_model, ModelError, MultiInputModel};
use miattn::nn::Tensor;
use miattn::train::{predict, prepare_record, Record};

// Literal values so the generated header is self-contained.
pub const MIATTN_MAX_ROWS: usize = 150;
pub const MIATTN_FEATURE_COLS: usize = 42;
/// Number of values in one feature matrix (rows × columns).
pub const MIATTN_FEATURE_LEN: usize = 6300;
const _: () = assert!(MIATTN_MAX_ROWS == MAX_ROWS && MIATTN_FEATURE_COLS == FEATURE_COLS);
const _: () = assert!(MIATTN_FEATURE_LEN == MAX_ROWS * FEATURE_COLS);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MiattnStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// SMILES could not be parsed or featurized.
    InvalidSmiles = 3,
    BufferTooSmall = 4,
    Io = 5,
    /// Model file is corrupt, truncated or from an unsupported version.
    InvalidModel = 6,
    Internal = 7,
}

/// Opaque handle to a loaded model.
pub struct MiattnModel {
    inner: MultiInputModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(MiattnStatus, String);

impl Failure {
    fn new(status: MiattnStatus, msg: impl Into<String>) -> Failure {
        Failure(status, msg.into())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::Io(_) => MiattnStatus::Io,
            _ => MiattnStatus::InvalidModel,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MiattnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MiattnStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MiattnStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(MiattnStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(MiattnStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::new(MiattnStatus::NullArgument, format!("{name} is null")));
    }
    if len < need {
        return Err(Failure::new(
            MiattnStatus::BufferTooSmall,
            format!("{name} holds {len} values, need {need}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn model_arg<'a>(p: *const MiattnModel) -> Result<&'a MiattnModel, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(MiattnStatus::NullArgument, "model is null"))
}

fn invalid_smiles(e: impl std::fmt::Display) -> Failure {
    Failure::new(MiattnStatus::InvalidSmiles, e.to_string())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn miattn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn miattn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Writes the row-major feature matrix of `smiles` into `out`
/// (at least `MIATTN_FEATURE_LEN` doubles) and the number of non-padding rows
/// into `valid_rows` when it is non-null.
///
/// # Safety
/// `smiles` must be NUL-terminated; `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn miattn_featurize(
    smiles: *const c_char,
    out: *mut f64,
    out_len: usize,
    valid_rows: *mut usize,
) -> MiattnStatus {
    guard(|| {
        let s = str_arg(smiles, "smiles")?;
        let dst = out_slice(out, out_len, MIATTN_FEATURE_LEN, "out")?;
        let (_, m) = featurize(s).map_err(invalid_smiles)?;
        for (i, row) in dst.chunks_mut(FEATURE_COLS).enumerate() {
            row.copy_from_slice(m.row(i));
        }
        if !valid_rows.is_null() {
            *valid_rows = m.valid_rows;
        }
        Ok(())
    })
}

/// Number of values written by [`miattn_descriptors`].
#[no_mangle]
pub extern "C" fn miattn_descriptor_count() -> usize {
    DESCRIPTOR_COUNT
}

/// Writes the unscaled descriptor vector of `smiles` into `out`.
///
/// # Safety
/// `smiles` must be NUL-terminated; `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn miattn_descriptors(smiles: *const c_char, out: *mut f64, out_len: usize) -> MiattnStatus {
    guard(|| {
        let s = str_arg(smiles, "smiles")?;
        let dst = out_slice(out, out_len, DESCRIPTOR_COUNT, "out")?;
        let g = miattn::chem::parse_smiles(s).map_err(invalid_smiles)?;
        dst.copy_from_slice(&compute_descriptors(&g).values);
        Ok(())
    })
}

/// Loads a model file. On success `*out` receives a handle to release with
/// [`miattn_model_free`].
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn miattn_model_load(path: *const c_char, out: *mut *mut MiattnModel) -> MiattnStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        if out.is_null() {
            return Err(Failure::new(MiattnStatus::NullArgument, "out is null"));
        }
        *out = std::ptr::null_mut();
        let inner = load_model(Path::new(p))?;
        *out = Box::into_raw(Box::new(MiattnModel { inner }));
        Ok(())
    })
}

/// Releases a model handle. NULL is ignored.
///
/// # Safety
/// `model` must come from [`miattn_model_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn miattn_model_free(model: *mut MiattnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Decision threshold stored with the model, or NaN for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn miattn_model_threshold(model: *const MiattnModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.inner.config.threshold)
}

/// Probability that `smiles` is active.
///
/// # Safety
/// `model` must be a live handle, `smiles` NUL-terminated, `probability` valid.
#[no_mangle]
pub unsafe extern "C" fn miattn_model_predict(
    model: *const MiattnModel,
    smiles: *const c_char,
    probability: *mut f64,
) -> MiattnStatus {
    guard(|| {
        let m = model_arg(model)?;
        let s = str_arg(smiles, "smiles")?;
        if probability.is_null() {
            return Err(Failure::new(MiattnStatus::NullArgument, "probability is null"));
        }
        let sample = prepare_record(&Record {
            id: String::new(),
            smiles: s.to_string(),
            label: 0.0,
        })
        .map_err(invalid_smiles)?;
        let p = predict(&m.inner, &[&sample]).map_err(|e| Failure::new(MiattnStatus::Internal, e.to_string()))?;
        *probability = p[0];
        Ok(())
    })
}

/// Writes one attention weight per feature-matrix row (`MIATTN_MAX_ROWS`
/// values, padding rows included) and, when non-null, the probability.
///
/// # Safety
/// `model` must be a live handle, `smiles` NUL-terminated, `weights` must point
/// to `weights_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn miattn_model_attention(
    model: *const MiattnModel,
    smiles: *const c_char,
    weights: *mut f64,
    weights_len: usize,
    probability: *mut f64,
) -> MiattnStatus {
    guard(|| {
        let m = model_arg(model)?;
        let s = str_arg(smiles, "smiles")?;
        let dst = out_slice(weights, weights_len, MAX_ROWS, "weights")?;
        let (g, fm) = featurize(s).map_err(invalid_smiles)?;
        let scaled = apply_scaler(&compute_descriptors(&g), &m.inner.scaler)
            .map_err(|e| Failure::new(MiattnStatus::InvalidModel, e.to_string()))?;
        let width = scaled.values.len();
        let r = Tensor::new(&[1, MAX_ROWS, FEATURE_COLS], fm.data).map_err(ModelError::from)?;
        let d = Tensor::new(&[1, width], scaled.values).map_err(ModelError::from)?;
        let out = m.inner.infer(&r, &d)?.sample(0);
        dst.copy_from_slice(&out.a);
        if !probability.is_null() {
            *probability = out.probability;
        }
        Ok(())
    })
}
