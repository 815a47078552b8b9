//! C ABI over the `compdet` library.
//!
//! Objects cross the boundary as opaque handles created by `*_new` style
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`CdetStatus`]; on failure the message is kept per thread and
//! can be copied out with [`cdet_last_error`]. Matrices are dense row-major
//! `f64` buffers. Panics are caught and reported as [`CdetStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use compdet::asd::{bh_procedure, pvalue_upper_bound};
use compdet::dsd::{achievable_pfdr_bound, classify_map, min_measurements, BoundInputs};
use compdet::model::{BackgroundModel, Dictionary};
use compdet::numerics::{gaussian_matrix, noncentral_chisq_cdf};
use compdet::sensing::{build_designed_plan, SensingPlan};
use compdet::{Error, Matrix, RngStream, SymMatrix, Vector};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Shape = 3,
    NotPositiveDefinite = 4,
    BackgroundTooStrong = 5,
    Infeasible = 6,
    Io = 7,
    Parse = 8,
    Panic = 9,
}

/// Opaque target dictionary.
pub struct CdetDictionary(Dictionary);

/// Opaque sensing plan (projection, whitener and background).
pub struct CdetSensingPlan(SensingPlan);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> CdetStatus {
    match e {
        Error::InvalidInput(_) | Error::Config(_) | Error::InsufficientDictionary { .. } => CdetStatus::InvalidInput,
        Error::Shape(_) => CdetStatus::Shape,
        Error::NotPositiveDefinite { .. } => CdetStatus::NotPositiveDefinite,
        Error::BackgroundTooStrong { .. } => CdetStatus::BackgroundTooStrong,
        Error::Infeasible { .. } => CdetStatus::Infeasible,
        Error::Io(_) => CdetStatus::Io,
        Error::Json(_) | Error::Csv(_) | Error::Schema(_) => CdetStatus::Parse,
    }
}

struct Fail(CdetStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CdetStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CdetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            CdetStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            CdetStatus::Panic
        }
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller promises `len` readable doubles at `ptr`.
    Ok(unsafe { std::slice::from_raw_parts(ptr, len) })
}

unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller promises `len` writable doubles at `ptr`.
    Ok(unsafe { std::slice::from_raw_parts_mut(ptr, len) })
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null and assumed valid for writes by the caller.
    unsafe { out.write(value) };
    Ok(())
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Fail> {
    // SAFETY: a non-null handle was produced by this library and not freed.
    unsafe { ptr.as_ref() }.ok_or_else(|| null(what))
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `len` bytes, into `buf`. Returns the full message length in
/// bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn cdet_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: `buf` holds at least `len > n` bytes.
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Builds a dictionary from `m` unit-norm targets of length `n`, stored as
/// the rows of `targets`. `priors` may be null for equal priors.
///
/// # Safety
/// `targets` must hold `m * n` doubles, `priors` null or `m` doubles, and
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdet_dictionary_new(
    targets: *const f64,
    m: usize,
    n: usize,
    priors: *const f64,
    out: *mut *mut CdetDictionary,
) -> CdetStatus {
    guard(|| {
        let data = unsafe { slice(targets, m * n, "targets")? };
        let rows: Vec<Vector> = data.chunks(n.max(1)).map(Vector::from_row_slice).collect();
        let dict = if priors.is_null() {
            Dictionary::uniform(rows)?
        } else {
            Dictionary::new(rows, unsafe { slice(priors, m, "priors")? }.to_vec())?
        };
        unsafe { write(out, Box::into_raw(Box::new(CdetDictionary(dict))), "out") }
    })
}

/// Loads a dictionary from a JSON file written by `compdet gen-dict`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdet_dictionary_load(path: *const c_char, out: *mut *mut CdetDictionary) -> CdetStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        // SAFETY: non-null, NUL-terminated by contract.
        let p = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| Fail(CdetStatus::InvalidInput, "path is not UTF-8".into()))?;
        let dict = Dictionary::load(Path::new(p))?;
        unsafe { write(out, Box::into_raw(Box::new(CdetDictionary(dict))), "out") }
    })
}

/// # Safety
/// `dict` must be null or a handle from this library that was not freed.
#[no_mangle]
pub unsafe extern "C" fn cdet_dictionary_free(dict: *mut CdetDictionary) {
    if !dict.is_null() {
        // SAFETY: produced by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(dict) });
    }
}

/// Number of targets and their length.
///
/// # Safety
/// Pointers must be valid; `dict` a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdet_dictionary_dims(dict: *const CdetDictionary, m: *mut usize, n: *mut usize) -> CdetStatus {
    guard(|| {
        let d = unsafe { handle(dict, "dict")? };
        unsafe {
            write(m, d.0.len(), "m")?;
            write(n, d.0.dim(), "n")
        }
    })
}

/// Minimum pairwise target distance and the extreme priors.
///
/// # Safety
/// Pointers must be valid; `dict` a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdet_dictionary_stats(
    dict: *const CdetDictionary,
    d_min: *mut f64,
    p_min: *mut f64,
    p_max: *mut f64,
) -> CdetStatus {
    guard(|| {
        let s = unsafe { handle(dict, "dict")? }.0.stats()?;
        unsafe {
            write(d_min, s.d_min, "d_min")?;
            write(p_min, s.p_min, "p_min")?;
            write(p_max, s.p_max, "p_max")
        }
    })
}

fn background(n: usize, cov: &[f64], mean: &[f64], sensor_variance: f64) -> Result<BackgroundModel, Fail> {
    let mean = if mean.is_empty() { Vector::zeros(n) } else { Vector::from_row_slice(mean) };
    let cov = if cov.is_empty() {
        SymMatrix::zeros(n)
    } else {
        SymMatrix::new(Matrix::from_row_slice(n, n, cov))?
    };
    Ok(BackgroundModel::new(mean, cov, sensor_variance)?)
}

/// Designed plan for a given `k x n` matrix `a`, background covariance
/// `cov` (`n x n`, null for none), mean (null for zero) and sensor noise
/// variance.
///
/// # Safety
/// Buffers must hold the stated number of doubles; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdet_plan_designed(
    a: *const f64,
    k: usize,
    n: usize,
    cov: *const f64,
    mean: *const f64,
    sensor_variance: f64,
    out: *mut *mut CdetSensingPlan,
) -> CdetStatus {
    guard(|| {
        let a = Matrix::from_row_slice(k, n, unsafe { slice(a, k * n, "a")? });
        let cov = if cov.is_null() { &[][..] } else { unsafe { slice(cov, n * n, "cov")? } };
        let mean = if mean.is_null() { &[][..] } else { unsafe { slice(mean, n, "mean")? } };
        let bg = background(n, cov, mean, sensor_variance)?;
        let plan = build_designed_plan(&a, &bg)?;
        unsafe { write(out, Box::into_raw(Box::new(CdetSensingPlan(plan))), "out") }
    })
}

/// Designed plan with `a` drawn as Gaussian with variance `1/k` from `seed`.
///
/// # Safety
/// As for [`cdet_plan_designed`].
#[no_mangle]
pub unsafe extern "C" fn cdet_plan_designed_seeded(
    k: usize,
    n: usize,
    seed: u64,
    cov: *const f64,
    mean: *const f64,
    sensor_variance: f64,
    out: *mut *mut CdetSensingPlan,
) -> CdetStatus {
    if k == 0 || n == 0 {
        set_error("k and n must be positive".into());
        return CdetStatus::InvalidInput;
    }
    let a = gaussian_matrix(k, n, 1.0 / k as f64, &RngStream::new(seed));
    let buf: Vec<f64> = a.transpose().iter().copied().collect();
    unsafe { cdet_plan_designed(buf.as_ptr(), k, n, cov, mean, sensor_variance, out) }
}

/// # Safety
/// `plan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdet_plan_free(plan: *mut CdetSensingPlan) {
    if !plan.is_null() {
        // SAFETY: produced by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(plan) });
    }
}

/// Number of measurements `k` and signal length `n`.
///
/// # Safety
/// Pointers must be valid; `plan` a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdet_plan_dims(plan: *const CdetSensingPlan, k: *mut usize, n: *mut usize) -> CdetStatus {
    guard(|| {
        let p = unsafe { handle(plan, "plan")? };
        unsafe {
            write(k, p.0.k(), "k")?;
            write(n, p.0.n(), "n")
        }
    })
}

/// Copies the sensing matrix `phi` (`k x n`, row-major) into `out`.
///
/// # Safety
/// `out` must hold `k * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn cdet_plan_phi(plan: *const CdetSensingPlan, out: *mut f64) -> CdetStatus {
    guard(|| {
        let p = &unsafe { handle(plan, "plan")? }.0;
        let dst = unsafe { slice_mut(out, p.k() * p.n(), "out")? };
        for (d, s) in dst.iter_mut().zip(p.phi().transpose().iter()) {
            *d = *s;
        }
        Ok(())
    })
}

/// Whitens a raw measurement `z` (length `k`) into `out` (length `k`),
/// removing the projected background mean.
///
/// # Safety
/// `z` and `out` must hold `k` doubles each.
#[no_mangle]
pub unsafe extern "C" fn cdet_plan_whiten(plan: *const CdetSensingPlan, z: *const f64, out: *mut f64) -> CdetStatus {
    guard(|| {
        let p = &unsafe { handle(plan, "plan")? }.0;
        let z = Vector::from_row_slice(unsafe { slice(z, p.k(), "z")? });
        let y = p.whiten(&z)?;
        unsafe { slice_mut(out, p.k(), "out")? }.copy_from_slice(y.as_slice());
        Ok(())
    })
}

/// MAP label of a whitened measurement `y` (length `k`) at known strength
/// `alpha`.
///
/// # Safety
/// Handles must be live; `y` must hold `k` doubles.
#[no_mangle]
pub unsafe extern "C" fn cdet_classify_map(
    plan: *const CdetSensingPlan,
    dict: *const CdetDictionary,
    y: *const f64,
    alpha: f64,
    label: *mut usize,
) -> CdetStatus {
    guard(|| {
        let p = &unsafe { handle(plan, "plan")? }.0;
        let d = &unsafe { handle(dict, "dict")? }.0;
        let y = Vector::from_row_slice(unsafe { slice(y, p.k(), "y")? });
        let decision = classify_map(&y, alpha, p.a(), d)?;
        unsafe { write(label, decision.label, "label") }
    })
}

/// Noncentral chi-squared CDF with `k` degrees of freedom.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdet_noncentral_chisq_cdf(x: f64, k: u32, nc: f64, out: *mut f64) -> CdetStatus {
    guard(|| unsafe { write(out, noncentral_chisq_cdf(x, k, nc)?, "out") })
}

/// Upper bound on the p-value of the anomaly statistic `d`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdet_anomaly_pvalue_bound(
    d: f64,
    k: usize,
    alpha_hat: f64,
    tau: f64,
    epsilon: f64,
    zeta: f64,
    out: *mut f64,
) -> CdetStatus {
    guard(|| unsafe { write(out, pvalue_upper_bound(d, k, alpha_hat, tau, epsilon, zeta)?, "out") })
}

/// Benjamini-Hochberg at level `delta`. Writes 1 into `rejected[i]` for each
/// rejected hypothesis and 0 otherwise, and the rejection count into
/// `count`.
///
/// # Safety
/// `pvalues` must hold `m` doubles, `rejected` `m` bytes.
#[no_mangle]
pub unsafe extern "C" fn cdet_bh(
    pvalues: *const f64,
    m: usize,
    delta: f64,
    rejected: *mut u8,
    count: *mut usize,
) -> CdetStatus {
    guard(|| {
        let p = unsafe { slice(pvalues, m, "pvalues")? };
        let bh = bh_procedure(p, delta)?;
        if m > 0 {
            if rejected.is_null() {
                return Err(null("rejected"));
            }
            // SAFETY: `rejected` holds `m` bytes by contract.
            let mask = unsafe { std::slice::from_raw_parts_mut(rejected, m) };
            mask.fill(0);
            for &i in &bh.rejected {
                mask[i] = 1;
            }
        }
        unsafe { write(count, bh.rejected.len(), "count") }
    })
}

/// Achievable worst-case pFDR bound. `conditions_ok` receives 1 when every
/// sufficient condition of the bound holds (otherwise the value is 1).
///
/// # Safety
/// Output pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdet_achievable_pfdr_bound(
    k: usize,
    n: usize,
    alpha_min: f64,
    d_min: f64,
    p_min: f64,
    p_max: f64,
    epsilon: f64,
    lambda_max: f64,
    value: *mut f64,
    conditions_ok: *mut u8,
) -> CdetStatus {
    guard(|| {
        let b = achievable_pfdr_bound(&BoundInputs {
            k,
            n,
            alpha_min,
            d_min,
            p_min,
            p_max,
            epsilon,
            lambda_max,
        })?;
        unsafe {
            write(value, b.value, "value")?;
            write(conditions_ok, u8::from(b.conditions.all()), "conditions_ok")
        }
    })
}

/// Smallest measurement count meeting the measurement-count condition.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdet_min_measurements(
    alpha_min: f64,
    d_min: f64,
    p_min: f64,
    p_max: f64,
    out: *mut usize,
) -> CdetStatus {
    guard(|| unsafe { write(out, min_measurements(alpha_min, d_min, p_min, p_max)?, "out") })
}
