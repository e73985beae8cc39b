//! C ABI over `xorlab`.
//!
//! Every fallible function returns an [`XlStatus`]; on failure the message is
//! available from [`xl_last_error`] on the same thread. Handles are opaque and
//! must be released with the matching `*_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xorlab::ensemble::{gen_base, gen_pinned, trial_rng, CoefficientScheme, EnsembleParams};
use xorlab::peel::two_core;
use xorlab::spmat::{frozen_set, nullity, rank, sample_kernel};
use xorlab::theory::{fixed_points, threshold_dk, threshold_dk_star};
use xorlab::wp::{wp_iterate, Init, TannerGraph};
use xorlab::{Error, FieldElement, FieldSpec, SparseMatrix};

/// Tolerance used for the threshold bisections.
const THRESHOLD_TOL: f64 = 1e-10;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XlStatus {
    Ok = 0,
    NullPointer = 1,
    Invalid = 2,
    Budget = 3,
    Io = 4,
    Domain = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XlScheme {
    AllOnes = 0,
    SeededNonzero = 1,
}

/// Nontrivial fixed points of `α ↦ 1 − exp(−d α^{k−1})`; all zero below `d_k*`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct XlFixedPoints {
    pub alpha_u: f64,
    pub alpha_s: f64,
    pub alpha_f: f64,
    pub degenerate: bool,
}

/// A finite field GF(q).
pub struct XlField(Arc<FieldSpec>);

/// A sparse matrix over a finite field.
pub struct XlMatrix(SparseMatrix);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(XlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::BudgetExceeded { .. } => XlStatus::Budget,
            Error::Io(_) => XlStatus::Io,
            Error::Domain(_) => XlStatus::Domain,
            _ => XlStatus::Invalid,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(XlStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(XlStatus::Invalid, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> XlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            XlStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside xorlab");
            XlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

fn element(f: &FieldSpec, v: u32) -> Result<FieldElement, Fail> {
    Ok(f.element(v)?)
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

fn boxed(m: SparseMatrix) -> *mut XlMatrix {
    Box::into_raw(Box::new(XlMatrix(m)))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn xl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string. Valid
/// until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn xl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

// fields

#[no_mangle]
pub unsafe extern "C" fn xl_field_new(q: u64, out: *mut *mut XlField) -> XlStatus {
    guard(|| {
        let f = FieldSpec::new(q)?;
        write_out(out, Box::into_raw(Box::new(XlField(Arc::new(f)))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn xl_field_free(field: *mut XlField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Field order `q`, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn xl_field_order(field: *const XlField) -> u32 {
    field.as_ref().map_or(0, |f| f.0.q())
}

unsafe fn binary_op(
    field: *const XlField,
    a: u32,
    b: u32,
    out: *mut u32,
    op: impl FnOnce(&FieldSpec, FieldElement, FieldElement) -> Result<FieldElement, Fail>,
) -> XlStatus {
    guard(|| {
        let f = &deref(field, "field")?.0;
        let v = op(f, element(f, a)?, element(f, b)?)?;
        write_out(out, v.0, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn xl_field_add(
    field: *const XlField,
    a: u32,
    b: u32,
    out: *mut u32,
) -> XlStatus {
    binary_op(field, a, b, out, |f, x, y| Ok(f.add(x, y)))
}

#[no_mangle]
pub unsafe extern "C" fn xl_field_sub(
    field: *const XlField,
    a: u32,
    b: u32,
    out: *mut u32,
) -> XlStatus {
    binary_op(field, a, b, out, |f, x, y| Ok(f.sub(x, y)))
}

#[no_mangle]
pub unsafe extern "C" fn xl_field_mul(
    field: *const XlField,
    a: u32,
    b: u32,
    out: *mut u32,
) -> XlStatus {
    binary_op(field, a, b, out, |f, x, y| Ok(f.mul(x, y)))
}

#[no_mangle]
pub unsafe extern "C" fn xl_field_div(
    field: *const XlField,
    a: u32,
    b: u32,
    out: *mut u32,
) -> XlStatus {
    binary_op(field, a, b, out, |f, x, y| Ok(f.div(x, y)?))
}

#[no_mangle]
pub unsafe extern "C" fn xl_field_inv(field: *const XlField, a: u32, out: *mut u32) -> XlStatus {
    binary_op(field, a, 0, out, |f, x, _| Ok(f.inv(x)?))
}

// matrices

/// Builds an `n_rows × n_cols` matrix from `nnz` coordinate triplets. A
/// repeated `(row, col)` pair is rejected.
#[no_mangle]
pub unsafe extern "C" fn xl_matrix_from_triplets(
    field: *const XlField,
    n_rows: usize,
    n_cols: usize,
    rows: *const usize,
    cols: *const usize,
    values: *const u32,
    nnz: usize,
    out: *mut *mut XlMatrix,
) -> XlStatus {
    guard(|| {
        let f = &deref(field, "field")?.0;
        if nnz > 0 && (rows.is_null() || cols.is_null() || values.is_null()) {
            return Err(null("triplet array"));
        }
        let mut data: Vec<Vec<(usize, FieldElement)>> = vec![Vec::new(); n_rows];
        for t in 0..nnz {
            let (i, j, v) = (*rows.add(t), *cols.add(t), *values.add(t));
            if i >= n_rows {
                return Err(invalid(format!(
                    "row index {i} out of range (bound {n_rows})"
                )));
            }
            data[i].push((j, element(f, v)?));
        }
        let m = SparseMatrix::from_rows(f.clone(), n_cols, data)?;
        write_out(out, boxed(m), "out")
    })
}

fn params(
    n: usize,
    k: usize,
    m: usize,
    q: u64,
    scheme: XlScheme,
    scheme_seed: u64,
) -> EnsembleParams {
    let mut p = EnsembleParams::with_rows(n, k, m, q);
    p.scheme = match scheme {
        XlScheme::AllOnes => CoefficientScheme::AllOnes,
        XlScheme::SeededNonzero => CoefficientScheme::SeededNonzero(scheme_seed),
    };
    p
}

/// Draws `m` uniform weight-`k` rows on `n` columns from trial `trial` of the
/// stream seeded by `seed`; identical to what the CLI generates.
#[no_mangle]
pub unsafe extern "C" fn xl_matrix_generate(
    n: usize,
    k: usize,
    m: usize,
    q: u64,
    scheme: XlScheme,
    scheme_seed: u64,
    seed: u64,
    trial: u64,
    out: *mut *mut XlMatrix,
) -> XlStatus {
    guard(|| {
        let a = gen_base(
            &params(n, k, m, q, scheme, scheme_seed),
            &mut trial_rng(seed, trial),
        )?;
        write_out(out, boxed(a), "out")
    })
}

/// As [`xl_matrix_generate`] followed by pinning rows; the number of pinning
/// rows is stored in `pins` when non-null.
#[no_mangle]
pub unsafe extern "C" fn xl_matrix_generate_pinned(
    n: usize,
    k: usize,
    m: usize,
    q: u64,
    scheme: XlScheme,
    scheme_seed: u64,
    seed: u64,
    trial: u64,
    out: *mut *mut XlMatrix,
    pins: *mut usize,
) -> XlStatus {
    guard(|| {
        let (a, t) = gen_pinned(
            &params(n, k, m, q, scheme, scheme_seed),
            &mut trial_rng(seed, trial),
        )?;
        if !pins.is_null() {
            pins.write(t);
        }
        write_out(out, boxed(a), "out")
    })
}

/// Reads the `M N q` text format.
#[no_mangle]
pub unsafe extern "C" fn xl_matrix_load(path: *const c_char, out: *mut *mut XlMatrix) -> XlStatus {
    guard(|| {
        let path = path_arg(path)?;
        let file = File::open(&path).map_err(Error::from)?;
        let a = SparseMatrix::read_text(BufReader::new(file))?;
        write_out(out, boxed(a), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn xl_matrix_save(matrix: *const XlMatrix, path: *const c_char) -> XlStatus {
    guard(|| {
        let a = &deref(matrix, "matrix")?.0;
        let path = path_arg(path)?;
        let file = File::create(&path).map_err(Error::from)?;
        a.write_text(BufWriter::new(file)).map_err(Error::from)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn xl_matrix_free(matrix: *mut XlMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// Row count, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn xl_matrix_rows(matrix: *const XlMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.0.n_rows())
}

/// Column count, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn xl_matrix_cols(matrix: *const XlMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.0.n_cols())
}

/// Number of nonzero entries, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn xl_matrix_nnz(matrix: *const XlMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.0.nnz())
}

#[no_mangle]
pub unsafe extern "C" fn xl_matrix_rank(matrix: *const XlMatrix, out: *mut usize) -> XlStatus {
    guard(|| write_out(out, rank(&deref(matrix, "matrix")?.0), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn xl_matrix_nullity(matrix: *const XlMatrix, out: *mut usize) -> XlStatus {
    guard(|| write_out(out, nullity(&deref(matrix, "matrix")?.0), "out"))
}

/// Columns that vanish on the whole kernel, ascending. `len` always receives
/// the set size; the indices are written only when `capacity` suffices, else
/// the call fails with `Invalid`. Pass `capacity = 0` to query the size.
#[no_mangle]
pub unsafe extern "C" fn xl_matrix_frozen_set(
    matrix: *const XlMatrix,
    buf: *mut usize,
    capacity: usize,
    len: *mut usize,
) -> XlStatus {
    guard(|| {
        let frozen = frozen_set(&deref(matrix, "matrix")?.0);
        write_out(len, frozen.len(), "len")?;
        if capacity == 0 && frozen.is_empty() {
            return Ok(());
        }
        if capacity < frozen.len() {
            return Err(invalid(format!(
                "buffer holds {capacity} entries, {} needed",
                frozen.len()
            )));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::ptr::copy_nonoverlapping(frozen.as_ptr(), buf, frozen.len());
        Ok(())
    })
}

/// Writes one uniform kernel vector (`n_cols` values) into `buf`.
#[no_mangle]
pub unsafe extern "C" fn xl_matrix_sample_kernel(
    matrix: *const XlMatrix,
    seed: u64,
    buf: *mut u32,
    capacity: usize,
) -> XlStatus {
    guard(|| {
        let a = &deref(matrix, "matrix")?.0;
        if capacity < a.n_cols() {
            return Err(invalid(format!(
                "buffer holds {capacity} entries, {} needed",
                a.n_cols()
            )));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let v = sample_kernel(a, &mut ChaCha8Rng::seed_from_u64(seed));
        for (j, x) in v.into_iter().enumerate() {
            buf.add(j).write(x.0);
        }
        Ok(())
    })
}

/// Peels to the 2-core. Core dimensions go to `core_rows` / `core_cols`; the
/// core itself is returned through `core` when that pointer is non-null.
#[no_mangle]
pub unsafe extern "C" fn xl_matrix_two_core(
    matrix: *const XlMatrix,
    core_rows: *mut usize,
    core_cols: *mut usize,
    core: *mut *mut XlMatrix,
) -> XlStatus {
    guard(|| {
        let p = two_core(&deref(matrix, "matrix")?.0);
        write_out(core_rows, p.core_rows, "core_rows")?;
        write_out(core_cols, p.core_cols, "core_cols")?;
        if !core.is_null() {
            core.write(boxed(p.core));
        }
        Ok(())
    })
}

/// Fraction of variable-to-check `𝚏` messages at the WP fixed point reached
/// from all-`𝚏`.
#[no_mangle]
pub unsafe extern "C" fn xl_wp_frozen_fraction(
    matrix: *const XlMatrix,
    max_iter: usize,
    out: *mut f64,
    converged: *mut bool,
) -> XlStatus {
    guard(|| {
        let g = TannerGraph::new(&deref(matrix, "matrix")?.0);
        let res = wp_iterate(&g, Init::AllFrozen, max_iter)?;
        if !converged.is_null() {
            converged.write(res.converged);
        }
        write_out(out, res.messages.frozen_fraction(), "out")
    })
}

// theory

#[no_mangle]
pub unsafe extern "C" fn xl_threshold_dk(k: u32, out: *mut f64) -> XlStatus {
    guard(|| write_out(out, threshold_dk(k, THRESHOLD_TOL)?, "out"))
}

#[no_mangle]
pub unsafe extern "C" fn xl_threshold_dk_star(k: u32, out: *mut f64) -> XlStatus {
    guard(|| write_out(out, threshold_dk_star(k, THRESHOLD_TOL)?, "out"))
}

#[no_mangle]
pub unsafe extern "C" fn xl_fixed_points(d: f64, k: u32, out: *mut XlFixedPoints) -> XlStatus {
    guard(|| {
        let fp = fixed_points(d, k, 1e-12)?;
        let v = XlFixedPoints {
            alpha_u: fp.alpha_u,
            alpha_s: fp.alpha_s,
            alpha_f: fp.alpha_f,
            degenerate: fp.degenerate,
        };
        write_out(out, v, "out")
    })
}
