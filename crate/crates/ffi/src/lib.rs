//! C ABI over `offdecay`.
//!
//! Every function returns an [`OdStatus`]; results go through out-pointers. On failure the
//! message is available from [`od_last_error`] on the same thread. Matrices are opaque
//! [`OdMatrix`] handles released with [`od_matrix_free`]; strings returned by the library are
//! released with [`od_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use offdecay::bounds::{demko_bound, jaffard_constants, thm44_constants, BoundKind, JaffardInputs, Thm44Inputs};
use offdecay::lattice::{m_epsilon, make_window, Lattice};
use offdecay::operator::{
    contraction_r, direct_inverse, neumann_inverse, op_norm, spectral_interval, OperatorMatrix,
};
use offdecay::phi::PhiSpec;
use offdecay::workbench::{gen_shift_example, generate, run_experiment, ExperimentConfig, GeneratorSpec};
use offdecay::{Complex64, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Capacity = 3,
    Convergence = 4,
    Fit = 5,
    Degenerate = 6,
    Singular = 7,
    Usage = 8,
    Precondition = 9,
    Parse = 10,
    Io = 11,
    Panic = 12,
}

/// Opaque matrix handle.
pub struct OdMatrix {
    inner: OperatorMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> OdStatus {
    match e {
        Error::Domain(_) => OdStatus::Domain,
        Error::Capacity(_) => OdStatus::Capacity,
        Error::Convergence { .. } => OdStatus::Convergence,
        Error::Fit(_) => OdStatus::Fit,
        Error::Degenerate(_) => OdStatus::Degenerate,
        Error::Singular(_) => OdStatus::Singular,
        Error::Usage(_) => OdStatus::Usage,
        Error::Precondition(_) => OdStatus::Precondition,
        Error::Parse(_) => OdStatus::Parse,
        Error::Io(_) => OdStatus::Io,
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

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OdStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(&format!("null pointer: {name}"));
            OdStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            OdStatus::Panic
        }
    }
}

fn write<T>(out: *mut T, value: T, name: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(name));
    }
    // SAFETY: non-null and, per the API contract, valid for writes
    unsafe { out.write(value) };
    Ok(())
}

fn matrix<'a>(m: *const OdMatrix) -> Result<&'a OperatorMatrix, Failure> {
    // SAFETY: handles come from this library and are live until od_matrix_free
    unsafe { m.as_ref() }.map(|m| &m.inner).ok_or(Failure::Null("matrix"))
}

fn string<'a>(s: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure::Null(name));
    }
    // SAFETY: non-null, NUL-terminated per the API contract
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| Failure::Lib(Error::Parse(format!("{name} is not UTF-8"))))
}

fn boxed(m: OperatorMatrix) -> *mut OdMatrix {
    Box::into_raw(Box::new(OdMatrix { inner: m }))
}

/// Message of the last failed call on this thread; empty if none. Valid until the next call.
#[no_mangle]
pub extern "C" fn od_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Matrix on the box of `radius` in `Z^dim` from row-major entries; `im` may be null.
///
/// # Safety
/// `re` (and `im` if non-null) must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn od_matrix_new(
    dim: usize,
    radius: usize,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut OdMatrix,
) -> OdStatus {
    guard(|| {
        if re.is_null() {
            return Err(Failure::Null("re"));
        }
        if dim == 0 {
            return Err(Error::Domain("dimension must be positive".into()).into());
        }
        let window = Arc::new(make_window(&Lattice::integer(dim), radius)?);
        let n = window.len();
        if len != n * n {
            return Err(Error::Domain(format!("expected {} entries, got {len}", n * n)).into());
        }
        let re = std::slice::from_raw_parts(re, len);
        let entries = if im.is_null() {
            re.iter().map(|&x| Complex64::new(x, 0.0)).collect()
        } else {
            let im = std::slice::from_raw_parts(im, len);
            re.iter().zip(im).map(|(&x, &y)| Complex64::new(x, y)).collect()
        };
        let m = OperatorMatrix::new(window, entries)?;
        write(out, boxed(m), "out")
    })
}

/// The shift example `I − Γ` on the box of `radius` in `Z`.
///
/// # Safety
/// Pointer arguments must be valid for the reads and writes they name; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn od_matrix_shift_example(
    k: f64,
    beta: f64,
    radius: usize,
    out: *mut *mut OdMatrix,
) -> OdStatus {
    guard(|| {
        let window = Arc::new(make_window(&Lattice::integer(1), radius)?);
        let (a, _) = gen_shift_example(k, window, beta)?;
        write(out, boxed(a), "out")
    })
}

/// Matrix from a JSON generator description.
///
/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn od_matrix_generate(json: *const c_char, out: *mut *mut OdMatrix) -> OdStatus {
    guard(|| {
        let spec: GeneratorSpec = serde_json::from_str(string(json, "json")?)
            .map_err(|e| Error::Parse(e.to_string()))?;
        write(out, boxed(generate(&spec)?.matrix), "out")
    })
}

/// # Safety
/// `m` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn od_matrix_free(m: *mut OdMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Side length `n` of the matrix, or 0 for null.
///
/// # Safety
/// Pointer arguments must be valid for the reads and writes they name; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn od_matrix_size(m: *const OdMatrix) -> usize {
    matrix(m).map(|a| a.n()).unwrap_or(0)
}

/// # Safety
/// Pointer arguments must be valid for the reads and writes they name; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn od_matrix_get(
    m: *const OdMatrix,
    i: usize,
    j: usize,
    re: *mut f64,
    im: *mut f64,
) -> OdStatus {
    guard(|| {
        let a = matrix(m)?;
        if i >= a.n() || j >= a.n() {
            return Err(Error::Domain(format!("index ({i}, {j}) outside {}x{}", a.n(), a.n())).into());
        }
        let z = a.get(i, j);
        write(re, z.re, "re")?;
        write(im, z.im, "im")
    })
}

/// # Safety
/// Pointer arguments must be valid for the reads and writes they name; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn od_op_norm(m: *const OdMatrix, tol: f64, out: *mut f64) -> OdStatus {
    guard(|| write(out, op_norm(matrix(m)?, tol)?, "out"))
}

/// # Safety
/// Pointer arguments must be valid for the reads and writes they name; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn od_contraction(
    m: *const OdMatrix,
    tol: f64,
    r: *mut f64,
    norm: *mut f64,
) -> OdStatus {
    guard(|| {
        let c = contraction_r(matrix(m)?, tol)?;
        write(r, c.r, "r")?;
        write(norm, c.op_norm, "norm")
    })
}

/// # Safety
/// Pointer arguments must be valid for the reads and writes they name; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn od_neumann_inverse(
    m: *const OdMatrix,
    tol: f64,
    out: *mut *mut OdMatrix,
    tail_bound: *mut f64,
    terms: *mut usize,
) -> OdStatus {
    guard(|| {
        let ni = neumann_inverse(matrix(m)?, tol)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        write(tail_bound, ni.tail_bound, "tail_bound")?;
        write(terms, ni.terms_used, "terms")?;
        write(out, boxed(ni.approx_inverse), "out")
    })
}

/// # Safety
/// Pointer arguments must be valid for the reads and writes they name; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn od_direct_inverse(m: *const OdMatrix, out: *mut *mut OdMatrix) -> OdStatus {
    guard(|| {
        let inv = direct_inverse(matrix(m)?)?;
        write(out, boxed(inv), "out")
    })
}

/// # Safety
/// Pointer arguments must be valid for the reads and writes they name; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn od_spectral_interval(
    m: *const OdMatrix,
    tol: f64,
    a: *mut f64,
    b: *mut f64,
    kappa: *mut f64,
) -> OdStatus {
    guard(|| {
        let s = spectral_interval(matrix(m)?, tol)?;
        write(a, s.a, "a")?;
        write(b, s.b, "b")?;
        write(kappa, s.kappa, "kappa")
    })
}

/// `m_ε` on `Z^dim`.
///
/// # Safety
/// Pointer arguments must be valid for the reads and writes they name; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn od_m_epsilon(dim: usize, epsilon: f64, tail_tol: f64, out: *mut f64) -> OdStatus {
    guard(|| {
        if dim == 0 {
            return Err(Error::Domain("dimension must be positive".into()).into());
        }
        write(out, m_epsilon(&Lattice::integer(dim), epsilon, tail_tol)?, "out")
    })
}

/// # Safety
/// Pointer arguments must be valid for the reads and writes they name; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn od_demko_bound(
    m: f64,
    a_spec: f64,
    b_spec: f64,
    c: f64,
    distance: f64,
    out: *mut f64,
) -> OdStatus {
    guard(|| write(out, demko_bound(m, a_spec, b_spec, c, distance)?, "out"))
}

/// Jaffard rate and constant with `m_ε` taken on `Z^dim` (tail tolerance added to each sum).
///
/// # Safety
/// Pointer arguments must be valid for the reads and writes they name; handles must be live.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn od_jaffard_constants(
    gamma: f64,
    c_gamma: f64,
    r: f64,
    op_norm_value: f64,
    dim: usize,
    delta: f64,
    gamma_prime: f64,
    tail_tol: f64,
    rate: *mut f64,
    constant: *mut f64,
) -> OdStatus {
    guard(|| {
        if dim == 0 {
            return Err(Error::Domain("dimension must be positive".into()).into());
        }
        let lattice = Lattice::integer(dim);
        let m_of = |eps: f64| m_epsilon(&lattice, eps, tail_tol).map(|m| m + tail_tol);
        let rep = jaffard_constants(
            &JaffardInputs {
                gamma,
                c_gamma,
                r,
                op_norm: op_norm_value,
            },
            &m_of,
            delta,
            gamma_prime,
        )?;
        write(rate, rep.rate, "rate")?;
        write(constant, rep.constant, "constant")
    })
}

/// # Safety
/// Pointer arguments must be valid for the reads and writes they name; handles must be live.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn od_thm44_constants(
    k1: f64,
    m1: f64,
    r: f64,
    op_norm_value: f64,
    a: f64,
    c2: f64,
    rate: *mut f64,
    constant: *mut f64,
) -> OdStatus {
    guard(|| {
        let rep = thm44_constants(&Thm44Inputs {
            k1,
            m1,
            r,
            op_norm: op_norm_value,
            a,
            c2,
        })?;
        write(rate, rep.rate, "rate")?;
        write(constant, rep.constant, "constant")
    })
}

/// `φ(p)` for a φ written as `power:<α>`, `log` or a `*`-joined product.
///
/// # Safety
/// `spec` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn od_phi_eval(spec: *const c_char, p: f64, out: *mut f64) -> OdStatus {
    guard(|| {
        let phi: PhiSpec = string(spec, "spec")?.parse()?;
        write(out, phi.eval(p)?, "out")
    })
}

/// # Safety
/// `spec` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn od_phi_inverse(spec: *const c_char, y: f64, tol: f64, out: *mut f64) -> OdStatus {
    guard(|| {
        let phi: PhiSpec = string(spec, "spec")?.parse()?;
        write(out, phi.inverse(y, tol)?, "out")
    })
}

/// Runs an experiment and returns its JSON report.
///
/// `bound` is `"jaffard"`, `"thm44"` or `"demko"`; `config_json` may be null for defaults.
///
/// # Safety
/// String arguments must be NUL-terminated; `*out` must be released with [`od_string_free`].
#[no_mangle]
pub unsafe extern "C" fn od_run_experiment(
    generator_json: *const c_char,
    bound: *const c_char,
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> OdStatus {
    guard(|| {
        let parse = |e: serde_json::Error| Error::Parse(e.to_string());
        let spec: GeneratorSpec = serde_json::from_str(string(generator_json, "generator_json")?).map_err(parse)?;
        let which: BoundKind =
            serde_json::from_value(serde_json::Value::String(string(bound, "bound")?.to_owned())).map_err(parse)?;
        let config: ExperimentConfig = if config_json.is_null() {
            ExperimentConfig::default()
        } else {
            serde_json::from_str(string(config_json, "config_json")?).map_err(parse)?
        };
        let report = run_experiment(&spec, which, &config)?;
        let text = serde_json::to_string(&report).map_err(parse)?;
        let c = CString::new(text).map_err(|e| Error::Parse(e.to_string()))?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn od_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
