//! C ABI over `nnmcert`.
//!
//! Every handle is opaque and owned by the caller once returned; release it
//! with the matching `*_free`. Fallible calls return an [`NnmStatus`] and write
//! their result through an out pointer. After a failure,
//! [`nnm_last_error_message`] describes it on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nnmcert::certify::{self, CertifyOptions, RecoveryCertificate, Status};
use nnmcert::counterexample;
use nnmcert::matcore::{self, Complex64, Field};
use nnmcert::operator::{self, MeasurementOperator, Measurements};
use nnmcert::solver::{self, SolverOptions, SolverResult};
use nnmcert::{Error, Matrix};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NnmStatus {
    Ok = 0,
    NullPointer = 1,
    Shape = 2,
    Field = 3,
    Numerical = 4,
    Degenerate = 5,
    Precondition = 6,
    Infeasible = 7,
    Parse = 8,
    Io = 9,
    Panic = 10,
}

/// Certificate outcome.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NnmCertStatus {
    Unique = 0,
    NotUnique = 1,
    Inconclusive = 2,
}

pub struct NnmMatrix(Matrix);
pub struct NnmOperator(MeasurementOperator);
pub struct NnmCertificate(RecoveryCertificate);
pub struct NnmSolverResult(SolverResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(e: &Error) -> NnmStatus {
    match e {
        Error::Shape(_) => NnmStatus::Shape,
        Error::FieldMismatch(_) => NnmStatus::Field,
        Error::NumericalFailure { .. } => NnmStatus::Numerical,
        Error::Degenerate(_) => NnmStatus::Degenerate,
        Error::Precondition(_) => NnmStatus::Precondition,
        Error::Infeasible { .. } => NnmStatus::Infeasible,
        Error::Parse(_) | Error::Json(_) => NnmStatus::Parse,
        Error::Io(_) => NnmStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NnmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NnmStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            NnmStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&format!("{}: {e}", e.kind()));
            status_of(&e)
        }
        Err(_) => {
            set_error("panic inside nnmcert");
            NnmStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn read_str<'a>(s: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure::Lib(Error::Parse(format!("{what} is not UTF-8: {e}"))))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn nnm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn nnm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Real matrix from `rows * cols` row-major entries.
///
/// # Safety
/// `data` must point to `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_matrix_new_real(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut NnmMatrix,
) -> NnmStatus {
    guard(|| {
        let values = slice(data, rows * cols, "data")?;
        let m = Matrix::real(rows, cols, values)?;
        write_out(out, boxed(NnmMatrix(m)), "out")
    })
}

/// Complex matrix from row-major real and imaginary parts.
///
/// # Safety
/// `re` and `im` must each point to `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_matrix_new_complex(
    rows: usize,
    cols: usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut NnmMatrix,
) -> NnmStatus {
    guard(|| {
        let re = slice(re, rows * cols, "re")?;
        let im = slice(im, rows * cols, "im")?;
        let values: Vec<Complex64> = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let m = Matrix::complex(rows, cols, &values)?;
        write_out(out, boxed(NnmMatrix(m)), "out")
    })
}

/// Parses the matrix JSON format `{"rows", "cols", "field", "data"}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_matrix_from_json(json: *const c_char, out: *mut *mut NnmMatrix) -> NnmStatus {
    guard(|| {
        let m = matcore::matrix_from_json(read_str(json, "json")?)?;
        write_out(out, boxed(NnmMatrix(m)), "out")
    })
}

/// # Safety
/// `m` must be a live matrix handle; `out` must be writable. The returned
/// string is released with [`nnm_string_free`].
#[no_mangle]
pub unsafe extern "C" fn nnm_matrix_to_json(m: *const NnmMatrix, out: *mut *mut c_char) -> NnmStatus {
    guard(|| {
        let m = deref(m, "m")?;
        write_out(out, into_c_string(matcore::matrix_to_json(&m.0)), "out")
    })
}

/// # Safety
/// `m` must be a live matrix handle; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_matrix_shape(m: *const NnmMatrix, rows: *mut usize, cols: *mut usize) -> NnmStatus {
    guard(|| {
        let (r, c) = deref(m, "m")?.0.shape();
        write_out(rows, r, "rows")?;
        write_out(cols, c, "cols")
    })
}

/// Entry `(i, j)` as real and imaginary parts.
///
/// # Safety
/// `m` must be a live matrix handle; `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_matrix_get(
    m: *const NnmMatrix,
    i: usize,
    j: usize,
    re: *mut f64,
    im: *mut f64,
) -> NnmStatus {
    guard(|| {
        let m = &deref(m, "m")?.0;
        if i >= m.rows() || j >= m.cols() {
            return Err(Error::Shape(format!("index ({i}, {j}) outside {:?}", m.shape())).into());
        }
        let z = m.get(i, j);
        write_out(re, z.re, "re")?;
        write_out(im, z.im, "im")
    })
}

/// # Safety
/// `m` must be a live matrix handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_matrix_nuclear_norm(m: *const NnmMatrix, out: *mut f64) -> NnmStatus {
    guard(|| {
        let v = matcore::nuclear_norm(&deref(m, "m")?.0)?;
        write_out(out, v, "out")
    })
}

/// # Safety
/// `m` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn nnm_matrix_free(m: *mut NnmMatrix) {
    free(m)
}

/// Parses the operator JSON format `{"shape", "field", "measurements"}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_operator_from_json(json: *const c_char, out: *mut *mut NnmOperator) -> NnmStatus {
    guard(|| {
        let op: MeasurementOperator = serde_json::from_str(read_str(json, "json")?).map_err(Error::from)?;
        write_out(out, boxed(NnmOperator(op)), "out")
    })
}

/// Operator whose null space is exactly the span of `count` directions.
///
/// # Safety
/// `directions` must point to `count` live matrix handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_operator_with_null_span(
    directions: *const *const NnmMatrix,
    count: usize,
    out: *mut *mut NnmOperator,
) -> NnmStatus {
    guard(|| {
        if count > 0 && directions.is_null() {
            return Err(Failure::Null("directions"));
        }
        let handles = if count == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(directions, count)
        };
        let dirs = handles
            .iter()
            .map(|&h| deref(h, "directions[i]").map(|m| m.0.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let op = operator::operator_with_null_span(&dirs)?;
        write_out(out, boxed(NnmOperator(op)), "out")
    })
}

/// Number of measurements.
///
/// # Safety
/// `op` must be a live operator handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_operator_len(op: *const NnmOperator, out: *mut usize) -> NnmStatus {
    guard(|| write_out(out, deref(op, "op")?.0.len(), "out"))
}

/// # Safety
/// `op` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn nnm_operator_free(op: *mut NnmOperator) {
    free(op)
}

/// Condition value `Re Tr(U* Q V) + ||Ubar* Q Vbar||_*` at ground truth `x`.
///
/// # Safety
/// `x` and `q` must be live matrix handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_oymak_value(x: *const NnmMatrix, q: *const NnmMatrix, out: *mut f64) -> NnmStatus {
    guard(|| {
        let gt = certify::prepare_ground_truth(&deref(x, "x")?.0)?;
        let v = certify::oymak_value(&gt, &deref(q, "q")?.0)?;
        write_out(out, v, "out")
    })
}

/// Certifies `x` as the unique minimizer for `op`. A NaN `band` selects the
/// default zero band.
///
/// # Safety
/// `x` and `op` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_certify(
    x: *const NnmMatrix,
    op: *const NnmOperator,
    band: f64,
    seed: u64,
    out: *mut *mut NnmCertificate,
) -> NnmStatus {
    guard(|| {
        let opts = CertifyOptions {
            band: (!band.is_nan()).then_some(band),
            seed,
            ..CertifyOptions::default()
        };
        let cert = certify::certify_operator(&deref(x, "x")?.0, &deref(op, "op")?.0, &opts)?;
        write_out(out, boxed(NnmCertificate(cert)), "out")
    })
}

/// # Safety
/// `c` must be a live certificate handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_certificate_status(c: *const NnmCertificate, out: *mut NnmCertStatus) -> NnmStatus {
    guard(|| {
        let s = match deref(c, "c")?.0.status {
            Status::Unique => NnmCertStatus::Unique,
            Status::NotUnique => NnmCertStatus::NotUnique,
            Status::Inconclusive => NnmCertStatus::Inconclusive,
        };
        write_out(out, s, "out")
    })
}

/// Step `t` of the non-uniqueness witness; `has_witness` is set to 0 when
/// the certificate carries none.
///
/// # Safety
/// `c` must be a live certificate handle; `t` and `has_witness` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_certificate_witness_t(
    c: *const NnmCertificate,
    t: *mut f64,
    has_witness: *mut i32,
) -> NnmStatus {
    guard(|| {
        let w = deref(c, "c")?.0.witness.as_ref();
        write_out(has_witness, i32::from(w.is_some()), "has_witness")?;
        write_out(t, w.map_or(f64::NAN, |w| w.t), "t")
    })
}

/// Full certificate as JSON, released with [`nnm_string_free`].
///
/// # Safety
/// `c` must be a live certificate handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_certificate_to_json(c: *const NnmCertificate, out: *mut *mut c_char) -> NnmStatus {
    guard(|| {
        let text = serde_json::to_string(&deref(c, "c")?.0).map_err(Error::from)?;
        write_out(out, into_c_string(text), "out")
    })
}

/// # Safety
/// `c` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn nnm_certificate_free(c: *mut NnmCertificate) {
    free(c)
}

/// Solves `min ||Y||_*` subject to `A(Y) = b` with default options and `seed`.
/// `b_im` may be null for a real operator.
///
/// # Safety
/// `op` must be a live operator handle; `b_re` (and `b_im` when non-null)
/// must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_solve(
    op: *const NnmOperator,
    b_re: *const f64,
    b_im: *const f64,
    len: usize,
    seed: u64,
    out: *mut *mut NnmSolverResult,
) -> NnmStatus {
    guard(|| {
        let op = &deref(op, "op")?.0;
        let re = slice(b_re, len, "b_re")?;
        let (field, values) = if b_im.is_null() {
            (Field::Real, re.iter().map(|&a| Complex64::new(a, 0.0)).collect())
        } else {
            let im = slice(b_im, len, "b_im")?;
            (
                Field::Complex,
                re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect(),
            )
        };
        let b = Measurements { field, values };
        let result = solver::solve_nnm(
            op,
            &b,
            &SolverOptions {
                seed,
                ..SolverOptions::default()
            },
        )?;
        write_out(out, boxed(NnmSolverResult(result)), "out")
    })
}

/// # Safety
/// `r` must be a live result handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_solver_result_objective(r: *const NnmSolverResult, out: *mut f64) -> NnmStatus {
    guard(|| write_out(out, deref(r, "r")?.0.objective, "out"))
}

/// Copy of the minimizer as a new matrix handle.
///
/// # Safety
/// `r` must be a live result handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnm_solver_result_matrix(r: *const NnmSolverResult, out: *mut *mut NnmMatrix) -> NnmStatus {
    guard(|| {
        let y = deref(r, "r")?.0.y.clone();
        write_out(out, boxed(NnmMatrix(y)), "out")
    })
}

/// # Safety
/// `r` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn nnm_solver_result_free(r: *mut NnmSolverResult) {
    free(r)
}

/// `||diag(-1, 0) + t 1 1^T||_*` in closed form.
#[no_mangle]
pub extern "C" fn nnm_counterexample_closed_form(t: f64) -> f64 {
    counterexample::closed_form_real(t)
}
