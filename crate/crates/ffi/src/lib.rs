//! C interface to the chaoscert certificate routines.
//!
//! Every fallible function returns a [`ChcStatus`]. On failure a message is
//! kept per thread and can be read with [`chc_last_error`]. Objects cross the
//! boundary as opaque handles that the caller releases with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chaoscert::certificates::{gaussian_pair_bound, split_gaussian_target, theorem35_bound, CertificateReport};
use chaoscert::chaos::exact_covariance;
use chaoscert::io::{parse_expansion, Symmetry};
use chaoscert::operator::{OperatorMatrix, Schatten};
use chaoscert::tensor::ChaosExpansion;
use chaoscert::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    NotPositiveSemidefinite = 4,
    Json = 5,
    Internal = 6,
}

/// An expansion `F = Σ_r I_r(f_r)` with values in `ℝ^Hdim`.
pub struct ChcExpansion(ChaosExpansion);

/// A square matrix acting on `ℝ^dim`.
pub struct ChcOperator(OperatorMatrix);

/// A certificate evaluated over an `(N, m)` grid.
pub struct ChcReport(CertificateReport);

/// The minimizing grid row of a certificate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChcBound {
    pub bound: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub r6: f64,
    pub n: usize,
    pub m: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> ChcStatus {
    match err {
        Error::InvalidInput(_) | Error::IndexOutOfRange { .. } | Error::RankViolation { .. } | Error::Io(_) => {
            ChcStatus::InvalidInput
        }
        Error::DimensionMismatch { .. } => ChcStatus::DimensionMismatch,
        Error::NotPositiveSemidefinite { .. } => ChcStatus::NotPositiveSemidefinite,
        Error::Json(_) => ChcStatus::Json,
    }
}

fn guard(f: impl FnOnce() -> Result<(), ChcStatus>) -> ChcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ChcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            ChcStatus::Internal
        }
    }
}

fn lift<T>(r: chaoscert::Result<T>) -> Result<T, ChcStatus> {
    r.map_err(|e| {
        let s = status_of(&e);
        set_error(e.to_string());
        s
    })
}

fn null(what: &str) -> ChcStatus {
    set_error(format!("null pointer: {what}"));
    ChcStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, ChcStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], ChcStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), ChcStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failure on this thread, or NULL. The pointer stays
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn chc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn chc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses expansion JSON (or a bare kernel file). With `strict` nonzero,
/// asymmetric coefficient lists are rejected instead of symmetrized.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chc_expansion_from_json(
    json: *const c_char,
    strict: i32,
    out: *mut *mut ChcExpansion,
) -> ChcStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|_| {
            set_error("json is not valid UTF-8".into());
            ChcStatus::InvalidInput
        })?;
        let symmetry = if strict != 0 { Symmetry::Strict } else { Symmetry::Symmetrize };
        let f = lift(parse_expansion(text, symmetry))?;
        emit(out, ChcExpansion(f))
    })
}

/// # Safety
/// `f` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn chc_expansion_free(f: *mut ChcExpansion) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Writes `dim ℋ`, the output dimension and the largest order.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn chc_expansion_dims(
    f: *const ChcExpansion,
    hdim: *mut usize,
    big_hdim: *mut usize,
    max_order: *mut usize,
) -> ChcStatus {
    guard(|| {
        let f = &deref(f, "expansion")?.0;
        if hdim.is_null() || big_hdim.is_null() || max_order.is_null() {
            return Err(null("dims"));
        }
        let t = f.truncation();
        *hdim = t.hdim;
        *big_hdim = t.big_hdim;
        *max_order = f.max_order();
        Ok(())
    })
}

/// Exact covariance `E[F ⊗ F]` as a new operator.
///
/// # Safety
/// `f` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chc_expansion_covariance(f: *const ChcExpansion, out: *mut *mut ChcOperator) -> ChcStatus {
    guard(|| {
        let f = &deref(f, "expansion")?.0;
        emit(out, ChcOperator(exact_covariance(f)))
    })
}

/// Builds a `dim × dim` operator from row-major entries.
///
/// # Safety
/// `data` must point to `dim * dim` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn chc_operator_from_row_major(
    dim: usize,
    data: *const f64,
    out: *mut *mut ChcOperator,
) -> ChcStatus {
    guard(|| {
        let len = dim.checked_mul(dim).ok_or_else(|| {
            set_error("dimension overflow".into());
            ChcStatus::InvalidInput
        })?;
        let entries = slice(data, len, "data")?;
        emit(out, ChcOperator(lift(OperatorMatrix::from_row_major(dim, entries))?))
    })
}

/// # Safety
/// `t` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn chc_operator_free(t: *mut ChcOperator) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Dimension of the operator, or 0 for NULL.
///
/// # Safety
/// `t` must be NULL or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn chc_operator_dim(t: *const ChcOperator) -> usize {
    t.as_ref().map_or(0, |t| t.0.dim())
}

/// Copies the entries in row-major order into `buf`, which holds `len` doubles.
///
/// # Safety
/// `t` must be valid and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn chc_operator_to_row_major(t: *const ChcOperator, buf: *mut f64, len: usize) -> ChcStatus {
    guard(|| {
        let t = &deref(t, "operator")?.0;
        let data = t.to_row_major();
        if len < data.len() {
            lift::<()>(Err(Error::DimensionMismatch { what: "output buffer", expected: data.len(), got: len }))?;
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, data.len()).copy_from_slice(&data);
        Ok(())
    })
}

/// Schatten `p`-norm; pass `INFINITY` for the operator norm.
///
/// # Safety
/// `t` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn chc_operator_schatten_norm(t: *const ChcOperator, p: f64, out: *mut f64) -> ChcStatus {
    guard(|| {
        let t = &deref(t, "operator")?.0;
        let sp = lift(Schatten::from_f64(p))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = t.schatten_norm(sp);
        Ok(())
    })
}

/// `(1/2)‖T1 − T2‖_{S₁}` for two covariance operators. `degenerate` is set to
/// 1 when neither operator is strictly positive definite, else 0.
///
/// # Safety
/// All pointers must be valid; `degenerate` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn chc_gaussian_pair_bound(
    t1: *const ChcOperator,
    t2: *const ChcOperator,
    value: *mut f64,
    degenerate: *mut i32,
) -> ChcStatus {
    guard(|| {
        let (t1, t2) = (&deref(t1, "t1")?.0, &deref(t2, "t2")?.0);
        if value.is_null() {
            return Err(null("value"));
        }
        let b = lift(gaussian_pair_bound(t1, t2))?;
        *value = b.value;
        if !degenerate.is_null() {
            *degenerate = i32::from(b.warning.is_some());
        }
        Ok(())
    })
}

/// Evaluates the certificate of `F` against `N(0, T)` on the grid
/// `n_grid × m_grid`. The target is split across orders the same way as the
/// command line tool does.
///
/// # Safety
/// Handles must be valid, grids must point to the stated number of entries
/// and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn chc_certify(
    f: *const ChcExpansion,
    target: *const ChcOperator,
    n_grid: *const usize,
    n_len: usize,
    m_grid: *const usize,
    m_len: usize,
    out: *mut *mut ChcReport,
) -> ChcStatus {
    guard(|| {
        let f = &deref(f, "expansion")?.0;
        let t = &deref(target, "target")?.0;
        let ns = slice(n_grid, n_len, "n_grid")?;
        let ms = slice(m_grid, m_len, "m_grid")?;
        let spec = lift(split_gaussian_target(f, t))?;
        emit(out, ChcReport(lift(theorem35_bound(f, &spec, ns, ms))?))
    })
}

/// # Safety
/// `r` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn chc_report_free(r: *mut ChcReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Copies the minimizing row of the report.
///
/// # Safety
/// `r` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn chc_report_bound(r: *const ChcReport, out: *mut ChcBound) -> ChcStatus {
    guard(|| {
        let r = &deref(r, "report")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ChcBound { bound: r.bound, r1: r.r1, r2: r.r2, r3: r.r3, r4: r.r4, r5: r.r5, r6: r.r6, n: r.n, m: r.m };
        Ok(())
    })
}

/// The full report, grid table and diagnostics included, as JSON. Release
/// the string with [`chc_string_free`].
///
/// # Safety
/// `r` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn chc_report_to_json(r: *const ChcReport, out: *mut *mut c_char) -> ChcStatus {
    guard(|| {
        let r = &deref(r, "report")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = lift(serde_json::to_string(r).map_err(Error::from))?;
        *out = CString::new(text).map_err(|_| ChcStatus::Internal)?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn chc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
