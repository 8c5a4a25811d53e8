//! C ABI over the esfd library: opaque handles, status codes, and a
//! thread-local last-error message.
//!
//! Conventions: every fallible call returns an [`EsfdStatus`] and writes
//! its result through out-pointers; handles are created and destroyed by
//! matching `_new`/`_sample` and `_free` calls; vector out-buffers must
//! hold exactly the batch/objective dimension. On any non-OK status the
//! caller can retrieve a human-readable message for the current thread
//! with [`esfd_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use esfd::error::Error;
use esfd::estimators::BatchEvaluation;
use esfd::objectives::{make_objective, Objective, ObjectiveSpec};
use esfd::sampling::{mirror_batch, sample_batch, ParamVector, PerturbationBatch};
use esfd::specfun;

/// Result of an esfd call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsfdStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Arguments were structurally invalid (unknown name, size mismatch).
    InvalidArgument = 2,
    /// A value lay outside the mathematical domain of the operation.
    DomainError = 3,
    /// The objective produced a non-finite value.
    EvaluationError = 4,
    /// An internal cross-check between two computation routes failed.
    ConsistencyError = 5,
}

/// Which gradient expression to evaluate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsfdEstimator {
    /// Finite differences.
    Fd = 0,
    /// Evolution strategies (raw value weighting).
    Es = 1,
    /// Finite differences rescaled by the squared mean perturbation norm.
    ScaledFd = 2,
    /// Central sum (value differences without the norm weighting).
    CentralSum = 3,
}

/// Opaque objective handle.
pub struct EsfdObjective {
    inner: Objective,
}

/// Opaque perturbation-batch handle.
pub struct EsfdBatch {
    inner: PerturbationBatch,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn stash_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> EsfdStatus {
    match err {
        Error::Domain(_) => EsfdStatus::DomainError,
        Error::Usage(_) => EsfdStatus::InvalidArgument,
        Error::NonFiniteEvaluation { .. } => EsfdStatus::EvaluationError,
        Error::Inconsistency(_) => EsfdStatus::ConsistencyError,
        Error::Io(_) => EsfdStatus::InvalidArgument,
    }
}

fn fail(err: &Error) -> EsfdStatus {
    stash_error(&err.to_string());
    status_of(err)
}

fn fail_null(what: &str) -> EsfdStatus {
    stash_error(&format!("{what} must not be null"));
    EsfdStatus::NullArgument
}

/// Copies the current thread's last error message into `buffer` as a
/// NUL-terminated string, truncating to `length` bytes. Returns the full
/// message length (excluding the NUL), so callers can detect truncation.
/// A null or zero-length buffer only queries the length.
///
/// # Safety
/// `buffer`, when non-null, must point to `length` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn esfd_last_error_message(buffer: *mut c_char, length: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buffer.is_null() && length > 0 {
            let n = bytes.len().min(length - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buffer.cast::<u8>(), n);
                *buffer.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Mean of `||N(0, sigma^2 I_n)||`.
///
/// # Safety
/// `out_mean` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn esfd_chi_mean(n: u64, sigma: f64, out_mean: *mut f64) -> EsfdStatus {
    if out_mean.is_null() {
        return fail_null("out_mean");
    }
    match specfun::chi_mean(n, sigma) {
        Ok(v) => {
            unsafe { *out_mean = v };
            EsfdStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Variance of `||N(0, sigma^2 I_n)||`.
///
/// # Safety
/// `out_variance` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn esfd_chi_variance(n: u64, sigma: f64, out_variance: *mut f64) -> EsfdStatus {
    if out_variance.is_null() {
        return fail_null("out_variance");
    }
    match specfun::chi_variance(n, sigma) {
        Ok(v) => {
            unsafe { *out_variance = v };
            EsfdStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// `Gamma(numerator_arg) / Gamma(denominator_arg)` via log-Gamma
/// differencing (no intermediate overflow for large arguments).
///
/// # Safety
/// `out_ratio` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn esfd_gamma_ratio_exact(
    numerator_arg: f64,
    denominator_arg: f64,
    out_ratio: *mut f64,
) -> EsfdStatus {
    if out_ratio.is_null() {
        return fail_null("out_ratio");
    }
    match specfun::gamma_ratio_exact(numerator_arg, denominator_arg) {
        Ok(v) => {
            unsafe { *out_ratio = v };
            EsfdStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// First-order asymptotic `Gamma(z+a)/Gamma(z+b)`.
///
/// # Safety
/// `out_ratio` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn esfd_gamma_ratio_asymptotic(
    z: f64,
    a: f64,
    b: f64,
    out_ratio: *mut f64,
) -> EsfdStatus {
    if out_ratio.is_null() {
        return fail_null("out_ratio");
    }
    match specfun::gamma_ratio_asymptotic(z, a, b) {
        Ok(v) => {
            unsafe { *out_ratio = v };
            EsfdStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Creates an objective from a family name (`constant`, `linear`,
/// `sphere`, `quadratic`, `rosenbrock`), a dimension, and optional
/// parallel name/value parameter arrays.
///
/// # Safety
/// `name` must be a NUL-terminated string; the parameter arrays, when
/// `parameter_count > 0`, must both hold `parameter_count` entries.
#[no_mangle]
pub unsafe extern "C" fn esfd_objective_new(
    name: *const c_char,
    dim: usize,
    parameter_names: *const *const c_char,
    parameter_values: *const f64,
    parameter_count: usize,
    out_objective: *mut *mut EsfdObjective,
) -> EsfdStatus {
    if name.is_null() {
        return fail_null("name");
    }
    if out_objective.is_null() {
        return fail_null("out_objective");
    }
    if parameter_count > 0 && (parameter_names.is_null() || parameter_values.is_null()) {
        return fail_null("parameter arrays");
    }
    let name = match CStr::from_ptr(name).to_str() {
        Ok(s) => s,
        Err(_) => {
            stash_error("objective name is not valid UTF-8");
            return EsfdStatus::InvalidArgument;
        }
    };
    let mut spec = ObjectiveSpec::new(name, dim);
    for i in 0..parameter_count {
        let key_ptr = *parameter_names.add(i);
        if key_ptr.is_null() {
            return fail_null("parameter name");
        }
        let key = match CStr::from_ptr(key_ptr).to_str() {
            Ok(s) => s,
            Err(_) => {
                stash_error("parameter name is not valid UTF-8");
                return EsfdStatus::InvalidArgument;
            }
        };
        spec = spec.with_parameter(key, *parameter_values.add(i));
    }
    match make_objective(&spec) {
        Ok(inner) => {
            *out_objective = Box::into_raw(Box::new(EsfdObjective { inner }));
            EsfdStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Releases an objective handle. Null is a no-op.
///
/// # Safety
/// `objective` must have come from `esfd_objective_new` and not have
/// been freed before.
#[no_mangle]
pub unsafe extern "C" fn esfd_objective_free(objective: *mut EsfdObjective) {
    if !objective.is_null() {
        drop(Box::from_raw(objective));
    }
}

/// Dimension of an objective (0 for null).
///
/// # Safety
/// `objective` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn esfd_objective_dim(objective: *const EsfdObjective) -> usize {
    objective.as_ref().map_or(0, |o| o.inner.dim())
}

/// Evaluates `R(x)`; `x` must hold the objective's dimension.
///
/// # Safety
/// Pointer arguments must be live and correctly sized.
#[no_mangle]
pub unsafe extern "C" fn esfd_objective_evaluate(
    objective: *const EsfdObjective,
    x: *const f64,
    dim: usize,
    out_value: *mut f64,
) -> EsfdStatus {
    let Some(obj) = objective.as_ref() else {
        return fail_null("objective");
    };
    if x.is_null() {
        return fail_null("x");
    }
    if out_value.is_null() {
        return fail_null("out_value");
    }
    if dim != obj.inner.dim() {
        stash_error(&format!(
            "x has dimension {dim} but the objective has dimension {}",
            obj.inner.dim()
        ));
        return EsfdStatus::InvalidArgument;
    }
    let xs = std::slice::from_raw_parts(x, dim);
    *out_value = obj.inner.evaluate(xs);
    EsfdStatus::Ok
}

/// Writes the analytic gradient of `R` at `x` into `out_gradient`
/// (`dim` entries).
///
/// # Safety
/// Pointer arguments must be live and correctly sized.
#[no_mangle]
pub unsafe extern "C" fn esfd_objective_gradient(
    objective: *const EsfdObjective,
    x: *const f64,
    dim: usize,
    out_gradient: *mut f64,
) -> EsfdStatus {
    let Some(obj) = objective.as_ref() else {
        return fail_null("objective");
    };
    if x.is_null() {
        return fail_null("x");
    }
    if out_gradient.is_null() {
        return fail_null("out_gradient");
    }
    if dim != obj.inner.dim() {
        stash_error(&format!(
            "x has dimension {dim} but the objective has dimension {}",
            obj.inner.dim()
        ));
        return EsfdStatus::InvalidArgument;
    }
    let xs = std::slice::from_raw_parts(x, dim);
    match obj.inner.analytic_gradient(xs) {
        Some(g) => {
            std::ptr::copy_nonoverlapping(g.as_ptr(), out_gradient, dim);
            EsfdStatus::Ok
        }
        None => {
            stash_error("objective has no analytic gradient");
            EsfdStatus::InvalidArgument
        }
    }
}

/// Draws `lambda` perturbations from `N(0, sigma^2 I)` around `theta`
/// (`dim` entries), deterministically in `seed`.
///
/// # Safety
/// `theta` must hold `dim` entries; `out_batch` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esfd_batch_sample(
    theta: *const f64,
    dim: usize,
    sigma: f64,
    lambda: usize,
    seed: u64,
    out_batch: *mut *mut EsfdBatch,
) -> EsfdStatus {
    if theta.is_null() {
        return fail_null("theta");
    }
    if out_batch.is_null() {
        return fail_null("out_batch");
    }
    let theta = std::slice::from_raw_parts(theta, dim).to_vec();
    let theta = match ParamVector::new(theta) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    match sample_batch(&theta, sigma, lambda, seed) {
        Ok(inner) => {
            *out_batch = Box::into_raw(Box::new(EsfdBatch { inner }));
            EsfdStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Builds the mirrored (antithetic) companion of a batch: each
/// perturbation followed by its negation, `2 lambda` samples in total.
///
/// # Safety
/// `batch` must be a live handle; `out_batch` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esfd_batch_mirror(
    batch: *const EsfdBatch,
    out_batch: *mut *mut EsfdBatch,
) -> EsfdStatus {
    let Some(b) = batch.as_ref() else {
        return fail_null("batch");
    };
    if out_batch.is_null() {
        return fail_null("out_batch");
    }
    let inner = mirror_batch(&b.inner);
    *out_batch = Box::into_raw(Box::new(EsfdBatch { inner }));
    EsfdStatus::Ok
}

/// Releases a batch handle. Null is a no-op.
///
/// # Safety
/// `batch` must have come from a batch constructor and not have been
/// freed before.
#[no_mangle]
pub unsafe extern "C" fn esfd_batch_free(batch: *mut EsfdBatch) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}

/// Batch dimension (0 for null).
///
/// # Safety
/// `batch` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn esfd_batch_dim(batch: *const EsfdBatch) -> usize {
    batch.as_ref().map_or(0, |b| b.inner.dim())
}

/// Batch population size (0 for null).
///
/// # Safety
/// `batch` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn esfd_batch_lambda(batch: *const EsfdBatch) -> usize {
    batch.as_ref().map_or(0, |b| b.inner.lambda())
}

/// Evaluates one gradient estimate on a batch.
///
/// `out_vector` must hold the batch dimension. `normalize_es` applies
/// the conventional `1/sigma^2` factor to the ES estimate (ignored by
/// the other kinds). `out_r_theta`, when non-null, receives `R(theta)`.
///
/// # Safety
/// Handles must be live; `out_vector` must hold `esfd_batch_dim(batch)`
/// entries.
#[no_mangle]
pub unsafe extern "C" fn esfd_gradient_estimate(
    batch: *const EsfdBatch,
    objective: *const EsfdObjective,
    kind: EsfdEstimator,
    normalize_es: bool,
    out_vector: *mut f64,
    out_r_theta: *mut f64,
) -> EsfdStatus {
    let Some(b) = batch.as_ref() else {
        return fail_null("batch");
    };
    let Some(obj) = objective.as_ref() else {
        return fail_null("objective");
    };
    if out_vector.is_null() {
        return fail_null("out_vector");
    }
    let eval = match BatchEvaluation::new(&b.inner, &obj.inner) {
        Ok(e) => e,
        Err(e) => return fail(&e),
    };
    let estimate = match kind {
        EsfdEstimator::Fd => eval.fd(),
        EsfdEstimator::Es => eval.es(normalize_es),
        EsfdEstimator::ScaledFd => eval.scaled_fd(),
        EsfdEstimator::CentralSum => eval.central_sum(),
    };
    std::ptr::copy_nonoverlapping(estimate.vector.as_ptr(), out_vector, b.inner.dim());
    if !out_r_theta.is_null() {
        *out_r_theta = eval.r_theta();
    }
    EsfdStatus::Ok
}

/// The exact difference `central_sum - es` via its closed form, with the
/// internal dual-route consistency check.
///
/// # Safety
/// Handles must be live; `out_vector` must hold `esfd_batch_dim(batch)`
/// entries.
#[no_mangle]
pub unsafe extern "C" fn esfd_gradient_difference(
    batch: *const EsfdBatch,
    objective: *const EsfdObjective,
    out_vector: *mut f64,
) -> EsfdStatus {
    let Some(b) = batch.as_ref() else {
        return fail_null("batch");
    };
    let Some(obj) = objective.as_ref() else {
        return fail_null("objective");
    };
    if out_vector.is_null() {
        return fail_null("out_vector");
    }
    match esfd::estimators::gradient_difference(&b.inner, &obj.inner) {
        Ok(d) => {
            std::ptr::copy_nonoverlapping(d.as_ptr(), out_vector, b.inner.dim());
            EsfdStatus::Ok
        }
        Err(e) => fail(&e),
    }
}
