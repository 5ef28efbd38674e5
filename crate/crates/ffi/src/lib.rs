//! C ABI over the teleportation library.
//!
//! Density operators cross the boundary as opaque `QtpDensity` handles that
//! the caller releases with `qtp_density_free`. Every fallible call returns a
//! `QtpStatus`; the message of the most recent failure on the calling thread
//! is available from `qtp_last_error_message`. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use qtp::channel::{apply_standard, simulate_protocol, CorrectionFamily};
use qtp::error::QtpError;
use qtp::fidelity::{fidelity_standard, fully_entangled_fraction, singlet_fraction, OptimizerConfig};
use qtp::linalg::{ComplexMatrix, DensityOperator};
use qtp::resources::{parse_input, parse_resource};
use qtp::weyl::WeylBasis;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QtpStatus {
    Ok = 0,
    NullPointer = 1,
    Parse = 2,
    InvalidState = 3,
    DimensionMismatch = 4,
    Unsolvable = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque density operator.
pub struct QtpDensity {
    inner: DensityOperator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let text = CString::new(msg).unwrap_or_else(|_| CString::new("error message contained NUL").expect("no NUL"));
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn status_of(e: &QtpError) -> QtpStatus {
    match e {
        QtpError::Parse(_) | QtpError::Json(_) => QtpStatus::Parse,
        QtpError::Io(_) => QtpStatus::Io,
        QtpError::DimensionMismatch(_) => QtpStatus::DimensionMismatch,
        QtpError::UnsolvableResource { .. } | QtpError::InvalidPhaseTable { .. } | QtpError::SupportViolation { .. } => {
            QtpStatus::Unsolvable
        }
        _ => QtpStatus::InvalidState,
    }
}

/// Runs `f`, converting errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), (QtpStatus, String)>) -> QtpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QtpStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            QtpStatus::Panic
        }
    }
}

fn lib_err(e: QtpError) -> (QtpStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (QtpStatus, String) {
    (QtpStatus::NullPointer, format!("{name} is NULL"))
}

/// # Safety
/// `p` must be NULL or point to a live handle from this library.
unsafe fn density<'a>(p: *const QtpDensity, name: &str) -> Result<&'a DensityOperator, (QtpStatus, String)> {
    p.as_ref().map(|d| &d.inner).ok_or_else(|| null(name))
}

/// # Safety
/// `s` must be NULL or a NUL-terminated string.
unsafe fn string<'a>(s: *const c_char, name: &str) -> Result<&'a str, (QtpStatus, String)> {
    if s.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(s).to_str().map_err(|_| (QtpStatus::Parse, format!("{name} is not UTF-8")))
}

fn boxed(rho: DensityOperator) -> *mut QtpDensity {
    Box::into_raw(Box::new(QtpDensity { inner: rho }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qtp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL, or
/// 0 when no error has been recorded.
///
/// # Safety
/// `buf` must be NULL or writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn qtp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Parses a resource descriptor such as `isotropic:n=2,F=0.8`.
///
/// # Safety
/// `descriptor` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qtp_resource_parse(descriptor: *const c_char, out: *mut *mut QtpDensity) -> QtpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let desc = string(descriptor, "descriptor")?;
        let chi = parse_resource(desc).map_err(lib_err)?;
        *out = boxed(chi);
        Ok(())
    })
}

/// Parses an input descriptor such as `haar:n=2,seed=1` into a density operator.
///
/// # Safety
/// `descriptor` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qtp_input_parse(descriptor: *const c_char, out: *mut *mut QtpDensity) -> QtpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let desc = string(descriptor, "descriptor")?;
        let input = parse_input(desc).map_err(lib_err)?;
        *out = boxed(input.state.density().map_err(lib_err)?);
        Ok(())
    })
}

/// Builds a density operator from row-major real and imaginary parts of a
/// `side × side` matrix. `dims` lists subsystem dimensions whose product is
/// `side`; pass `ndims = 0` for a single system.
///
/// # Safety
/// `re` and `im` must be readable for `side * side` doubles, `dims` for
/// `ndims` entries, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qtp_density_from_parts(
    re: *const f64,
    im: *const f64,
    side: usize,
    dims: *const usize,
    ndims: usize,
    out: *mut *mut QtpDensity,
) -> QtpStatus {
    guard(|| {
        if re.is_null() || im.is_null() || out.is_null() || (ndims > 0 && dims.is_null()) {
            return Err(null("argument"));
        }
        let len = side.checked_mul(side).ok_or((QtpStatus::InvalidState, "side overflows".to_string()))?;
        let re = std::slice::from_raw_parts(re, len);
        let im = std::slice::from_raw_parts(im, len);
        let dims = if ndims == 0 { vec![side] } else { std::slice::from_raw_parts(dims, ndims).to_vec() };
        let m = ComplexMatrix::from_fn(side, side, |r, c| Complex64::new(re[r * side + c], im[r * side + c]));
        *out = boxed(DensityOperator::new(m, dims).map_err(lib_err)?);
        Ok(())
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `rho` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qtp_density_free(rho: *mut QtpDensity) {
    if !rho.is_null() {
        drop(Box::from_raw(rho));
    }
}

/// Matrix side of the operator, or 0 for NULL.
///
/// # Safety
/// `rho` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qtp_density_side(rho: *const QtpDensity) -> usize {
    rho.as_ref().map_or(0, |d| d.inner.side())
}

/// Copies the entries row-major into `re` and `im`, each of length `len`,
/// which must be at least `side * side`.
///
/// # Safety
/// `rho` must be a live handle; `re` and `im` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qtp_density_entries(rho: *const QtpDensity, re: *mut f64, im: *mut f64, len: usize) -> QtpStatus {
    guard(|| {
        let rho = density(rho, "rho")?;
        if re.is_null() || im.is_null() {
            return Err(null("output buffer"));
        }
        let side = rho.side();
        if len < side * side {
            return Err((QtpStatus::BufferTooSmall, format!("need {} entries, buffer holds {len}", side * side)));
        }
        let m = rho.matrix();
        for r in 0..side {
            for c in 0..side {
                *re.add(r * side + c) = m[(r, c)].re;
                *im.add(r * side + c) = m[(r, c)].im;
            }
        }
        Ok(())
    })
}

/// Writes `⟨Φ|χ|Φ⟩` to `out`.
///
/// # Safety
/// `chi` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qtp_singlet_fraction(chi: *const QtpDensity, out: *mut f64) -> QtpStatus {
    scalar(chi, out, singlet_fraction)
}

/// Writes the standard-protocol fidelity to `out`.
///
/// # Safety
/// `chi` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qtp_fidelity_standard(chi: *const QtpDensity, out: *mut f64) -> QtpStatus {
    scalar(chi, out, fidelity_standard)
}

/// Writes the fully entangled fraction to `out`, optimizing with `restarts`
/// restarts on `seed`; other optimizer settings take their defaults.
///
/// # Safety
/// `chi` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qtp_fully_entangled_fraction(
    chi: *const QtpDensity,
    restarts: usize,
    seed: u64,
    out: *mut f64,
) -> QtpStatus {
    let cfg = OptimizerConfig { restarts, seed, ..OptimizerConfig::default() };
    scalar(chi, out, |chi| fully_entangled_fraction(chi, &cfg).map(|r| r.value))
}

unsafe fn scalar(
    chi: *const QtpDensity,
    out: *mut f64,
    f: impl FnOnce(&DensityOperator) -> qtp::error::Result<f64>,
) -> QtpStatus {
    guard(|| {
        let chi = density(chi, "chi")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = f(chi).map_err(lib_err)?;
        Ok(())
    })
}

/// Output of the standard teleportation channel over `chi` for input `rho`.
/// With `oracle` nonzero the brute-force protocol simulation is used instead
/// of the closed form.
///
/// # Safety
/// `chi` and `rho` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qtp_teleport_standard(
    chi: *const QtpDensity,
    rho: *const QtpDensity,
    oracle: i32,
    out: *mut *mut QtpDensity,
) -> QtpStatus {
    guard(|| {
        let chi = density(chi, "chi")?;
        let rho = density(rho, "rho")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = chi.bipartite_side().map_err(lib_err)?;
        let basis = WeylBasis::new(n).map_err(lib_err)?;
        let result = if oracle != 0 {
            simulate_protocol(&basis, chi, &CorrectionFamily::standard(&basis), rho)
        } else {
            apply_standard(&basis, chi, rho)
        };
        *out = boxed(result.map_err(lib_err)?.rho_out);
        Ok(())
    })
}
