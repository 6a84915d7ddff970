//! C ABI over the lyapsim estimators.
//!
//! Ensembles travel across the boundary as opaque [`LyapEnsemble`] handles;
//! every fallible call returns a [`LyapStatus`] and writes results through
//! out-pointers. Scalar reference functions (digamma, the closed-form
//! exponents) return NaN on invalid input instead, so they can be used in
//! expressions directly. The generated header lands in `include/lyapsim.h`
//! at build time.
//!
//! Handles are plain heap boxes: create, use from one thread at a time,
//! release with [`lyap_ensemble_free`]. All estimator calls are pure given
//! the handle and the (seed, stream_id) pair, with the same bitwise
//! reproducibility as the Rust API.

use std::ffi::{c_char, c_int};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nalgebra::DVector;

use lyapsim::chain::{
    least_exponent_distance, second_exponent_pair, spectrum_qr, top_exponent, ChainConfig,
    ExponentEstimate,
};
use lyapsim::ensembles::{EnsembleSpec, ShiftParams};
use lyapsim::error::Error;
use lyapsim::stats::{digamma, newman_exponents, ssb_exponent};
use lyapsim::structure::{lcd, small_ball_estimate, LcdQuery};

/// Call outcome. Everything except `Ok` leaves out-parameters untouched.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    RankDeficient = 4,
    NonIidFamily = 5,
    ChainDied = 6,
    AllChainsDied = 7,
    Config = 8,
    Io = 9,
    Internal = 10,
}

fn status_of(err: &Error) -> LyapStatus {
    match err {
        Error::InvalidArgument(_) => LyapStatus::InvalidArgument,
        Error::DimensionMismatch(_) => LyapStatus::DimensionMismatch,
        Error::RankDeficient { .. } => LyapStatus::RankDeficient,
        Error::NonIidFamily(_) => LyapStatus::NonIidFamily,
        Error::ChainDied { .. } => LyapStatus::ChainDied,
        Error::AllChainsDied => LyapStatus::AllChainsDied,
        Error::Config(_) => LyapStatus::Config,
        Error::Io(_) => LyapStatus::Io,
        Error::Internal(_) => LyapStatus::Internal,
    }
}

/// Opaque matrix-ensemble handle.
pub struct LyapEnsemble {
    spec: EnsembleSpec,
}

/// One exponent estimate. `died_at` is meaningful only when `died` is true;
/// a dead chain's value averages the increments collected before the fatal
/// step over the full requested length.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapExponent {
    /// 1 for the top exponent, j for the j-th spectrum order, 2 for the
    /// pair sum, the dimension for the least exponent.
    pub order: u32,
    pub value: f64,
    /// Standard error of the value; named to stay clear of the stdio macro.
    pub std_err: f64,
    pub n_steps: u64,
    pub dim: u32,
    pub died: bool,
    pub died_at: u64,
}

impl LyapExponent {
    fn from_estimate(est: &ExponentEstimate) -> Self {
        Self {
            order: est.order as u32,
            value: est.value,
            std_err: est.stderr,
            n_steps: est.n_steps as u64,
            dim: est.dim as u32,
            died: est.died,
            died_at: est.died_at.unwrap_or(0) as u64,
        }
    }
}

/// Runs `f` behind a panic guard; a Rust panic becomes `Internal` instead of
/// unwinding across the C boundary.
fn guarded(f: impl FnOnce() -> LyapStatus) -> LyapStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(LyapStatus::Internal)
}

fn emit_handle(spec: Result<EnsembleSpec, Error>, out: *mut *mut LyapEnsemble) -> LyapStatus {
    if out.is_null() {
        return LyapStatus::NullPointer;
    }
    match spec {
        Ok(spec) => {
            let handle = Box::into_raw(Box::new(LyapEnsemble { spec }));
            unsafe { ptr::write(out, handle) };
            LyapStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Creates an iid Gaussian ensemble with entry scale 1/sqrt(n).
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn lyap_ensemble_gaussian(
    n: usize,
    out: *mut *mut LyapEnsemble,
) -> LyapStatus {
    guarded(|| emit_handle(EnsembleSpec::gaussian(n), out))
}

/// Creates an iid Rademacher (sign) ensemble with entry scale 1/sqrt(n).
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn lyap_ensemble_rademacher(
    n: usize,
    out: *mut *mut LyapEnsemble,
) -> LyapStatus {
    guarded(|| emit_handle(EnsembleSpec::rademacher(n), out))
}

/// Creates an iid symmetric-uniform ensemble with entry scale 1/sqrt(n).
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn lyap_ensemble_uniform(
    n: usize,
    out: *mut *mut LyapEnsemble,
) -> LyapStatus {
    guarded(|| emit_handle(EnsembleSpec::uniform_sym(n), out))
}

/// Creates an iid two-point ensemble taking `a` with probability `p` and
/// `b` otherwise, atoms normalized to mean 0 and variance 1.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn lyap_ensemble_two_point(
    n: usize,
    p: f64,
    a: f64,
    b: f64,
    out: *mut *mut LyapEnsemble,
) -> LyapStatus {
    guarded(|| emit_handle(EnsembleSpec::two_point(n, p, a, b), out))
}

/// Creates the 2n x 2n symplectic transfer-matrix ensemble with Wigner
/// coupling `lambda` and energy `energy`.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn lyap_ensemble_symplectic(
    n: usize,
    lambda: f64,
    energy: f64,
    out: *mut *mut LyapEnsemble,
) -> LyapStatus {
    guarded(|| emit_handle(EnsembleSpec::symplectic_wigner(n, lambda, energy), out))
}

/// Creates the deterministic 2x2 shift-cocycle ensemble. `cos_coeffs[k]`
/// multiplies cos(2 pi k x), `sin_coeffs[k]` multiplies sin(2 pi (k+1) x);
/// either pointer may be null when its length is zero.
///
/// # Safety
/// `cos_coeffs`/`sin_coeffs` must point to `cos_len`/`sin_len` readable
/// doubles when nonzero; `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn lyap_ensemble_shift(
    energy: f64,
    omega: f64,
    x0: f64,
    cos_coeffs: *const f64,
    cos_len: usize,
    sin_coeffs: *const f64,
    sin_len: usize,
    out: *mut *mut LyapEnsemble,
) -> LyapStatus {
    guarded(|| {
        let read = |ptr: *const f64, len: usize| -> Option<Vec<f64>> {
            if len == 0 {
                Some(Vec::new())
            } else if ptr.is_null() {
                None
            } else {
                Some(unsafe { slice::from_raw_parts(ptr, len) }.to_vec())
            }
        };
        let (Some(cos), Some(sin)) = (read(cos_coeffs, cos_len), read(sin_coeffs, sin_len))
        else {
            return LyapStatus::NullPointer;
        };
        let params = ShiftParams { energy, omega, x0, cos_coeffs: cos, sin_coeffs: sin };
        emit_handle(EnsembleSpec::shift_cocycle(params), out)
    })
}

/// Replaces the entry scale of an iid ensemble (default 1/sqrt(n)).
/// Structured families reject this.
///
/// # Safety
/// `ensemble` must be a live handle from a constructor, not used
/// concurrently.
#[no_mangle]
pub unsafe extern "C" fn lyap_ensemble_set_scale(
    ensemble: *mut LyapEnsemble,
    scale: f64,
) -> LyapStatus {
    guarded(|| {
        let Some(handle) = (unsafe { ensemble.as_mut() }) else {
            return LyapStatus::NullPointer;
        };
        match handle.spec.clone().with_scale(scale) {
            Ok(spec) => {
                handle.spec = spec;
                LyapStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Matrix dimension of the ensemble (2n for symplectic, 2 for shift).
///
/// # Safety
/// `ensemble` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn lyap_ensemble_dim(ensemble: *const LyapEnsemble) -> usize {
    unsafe { ensemble.as_ref() }.map_or(0, |h| h.spec.dim())
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `ensemble` must be null or a handle not freed before; it is invalid
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn lyap_ensemble_free(ensemble: *mut LyapEnsemble) {
    if !ensemble.is_null() {
        drop(unsafe { Box::from_raw(ensemble) });
    }
}

fn chain_config(
    ensemble: *const LyapEnsemble,
    n_steps: usize,
    seed: u64,
    stream_id: u64,
) -> Result<ChainConfig, LyapStatus> {
    let handle = unsafe { ensemble.as_ref() }.ok_or(LyapStatus::NullPointer)?;
    Ok(ChainConfig::new(handle.spec.clone(), n_steps, seed).with_stream(stream_id))
}

fn emit_estimate(
    result: Result<ExponentEstimate, Error>,
    out: *mut LyapExponent,
) -> LyapStatus {
    match result {
        Ok(est) => {
            unsafe { ptr::write(out, LyapExponent::from_estimate(&est)) };
            LyapStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Estimates the top Lyapunov exponent over `n_steps` factors.
///
/// # Safety
/// `ensemble` must be a live handle; `out` must be valid for writing one
/// `LyapExponent`.
#[no_mangle]
pub unsafe extern "C" fn lyap_top_exponent(
    ensemble: *const LyapEnsemble,
    n_steps: usize,
    seed: u64,
    stream_id: u64,
    out: *mut LyapExponent,
) -> LyapStatus {
    guarded(|| {
        if out.is_null() {
            return LyapStatus::NullPointer;
        }
        match chain_config(ensemble, n_steps, seed, stream_id) {
            Ok(cfg) => emit_estimate(top_exponent(&cfg, None), out),
            Err(s) => s,
        }
    })
}

/// Estimates the sum of the two leading exponents.
///
/// # Safety
/// `ensemble` must be a live handle; `out` must be valid for writing one
/// `LyapExponent`.
#[no_mangle]
pub unsafe extern "C" fn lyap_pair_exponent(
    ensemble: *const LyapEnsemble,
    n_steps: usize,
    seed: u64,
    stream_id: u64,
    out: *mut LyapExponent,
) -> LyapStatus {
    guarded(|| {
        if out.is_null() {
            return LyapStatus::NullPointer;
        }
        match chain_config(ensemble, n_steps, seed, stream_id) {
            Ok(cfg) => emit_estimate(second_exponent_pair(&cfg, None, None), out),
            Err(s) => s,
        }
    })
}

/// Estimates the least exponent by the hyperplane-distance recursion.
///
/// # Safety
/// `ensemble` must be a live handle; `out` must be valid for writing one
/// `LyapExponent`.
#[no_mangle]
pub unsafe extern "C" fn lyap_least_exponent(
    ensemble: *const LyapEnsemble,
    n_steps: usize,
    seed: u64,
    stream_id: u64,
    out: *mut LyapExponent,
) -> LyapStatus {
    guarded(|| {
        if out.is_null() {
            return LyapStatus::NullPointer;
        }
        match chain_config(ensemble, n_steps, seed, stream_id) {
            Ok(cfg) => emit_estimate(least_exponent_distance(&cfg), out),
            Err(s) => s,
        }
    })
}

/// Estimates the `k` leading exponents by orthonormal-frame iteration,
/// writing them in decreasing order.
///
/// # Safety
/// `ensemble` must be a live handle; `out` must be valid for writing `k`
/// `LyapExponent` values.
#[no_mangle]
pub unsafe extern "C" fn lyap_spectrum(
    ensemble: *const LyapEnsemble,
    n_steps: usize,
    seed: u64,
    stream_id: u64,
    k: usize,
    out: *mut LyapExponent,
) -> LyapStatus {
    guarded(|| {
        if out.is_null() {
            return LyapStatus::NullPointer;
        }
        let cfg = match chain_config(ensemble, n_steps, seed, stream_id) {
            Ok(cfg) => cfg,
            Err(s) => return s,
        };
        match spectrum_qr(&cfg, k) {
            Ok(ests) => {
                for (j, est) in ests.iter().enumerate() {
                    unsafe { ptr::write(out.add(j), LyapExponent::from_estimate(est)) };
                }
                LyapStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Writes the n closed-form Gaussian-ensemble exponents, decreasing.
///
/// # Safety
/// `out` must be valid for writing `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn lyap_newman_exponents(n: usize, out: *mut f64) -> LyapStatus {
    guarded(|| {
        if out.is_null() {
            return LyapStatus::NullPointer;
        }
        match newman_exponents(n) {
            Ok(mu) => {
                for (i, m) in mu.iter().enumerate() {
                    unsafe { ptr::write(out.add(i), *m) };
                }
                LyapStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Digamma function; NaN for d <= 0 or non-finite d.
#[no_mangle]
pub extern "C" fn lyap_digamma(d: f64) -> f64 {
    guarded_scalar(|| digamma(d))
}

/// Weak-coupling symplectic exponent gamma_d
/// (lambda^2 (1 + 2(n-d)) / (8 sin^2 kappa), E = 2 cos kappa);
/// NaN outside 1 <= d <= n, 0 < |E| < 2.
#[no_mangle]
pub extern "C" fn lyap_ssb_exponent(n: usize, d: usize, lambda: f64, energy: f64) -> f64 {
    guarded_scalar(|| ssb_exponent(n, d, lambda, energy))
}

fn guarded_scalar(f: impl FnOnce() -> Result<f64, Error>) -> f64 {
    catch_unwind(AssertUnwindSafe(f))
        .map(|r| r.unwrap_or(f64::NAN))
        .unwrap_or(f64::NAN)
}

/// Least common denominator of the vector at `x`: grid scan over
/// (0, theta_max] at `grid_step` resolution with local bisection. Writes the
/// value to `out_value` and the verified admissible dilation to
/// `out_witness` (NaN when the search certified value >= theta_max).
///
/// # Safety
/// `x` must point to `n` readable doubles; `out_value` and `out_witness`
/// must each be valid for writing one double.
#[no_mangle]
pub unsafe extern "C" fn lyap_lcd(
    x: *const f64,
    n: usize,
    gamma: f64,
    kappa: f64,
    theta_max: f64,
    grid_step: f64,
    out_value: *mut f64,
    out_witness: *mut f64,
) -> LyapStatus {
    guarded(|| {
        if x.is_null() || out_value.is_null() || out_witness.is_null() {
            return LyapStatus::NullPointer;
        }
        let v = DVector::from_column_slice(unsafe { slice::from_raw_parts(x, n) });
        let q = LcdQuery { gamma, kappa, theta_max, grid_step };
        match lcd(&v, &q) {
            Ok(r) => {
                unsafe {
                    ptr::write(out_value, r.value);
                    ptr::write(out_witness, r.witness_theta.unwrap_or(f64::NAN));
                }
                LyapStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Small-ball probability estimate of the weighted atom sum along `x`
/// (maximum over a fixed 21-point target grid spanning [-3, 3]); the
/// ensemble must be an iid scalar-atom family.
///
/// # Safety
/// `x` must point to `n` readable doubles; `ensemble` must be a live
/// handle; `out` must be valid for writing one double.
#[no_mangle]
pub unsafe extern "C" fn lyap_small_ball(
    x: *const f64,
    n: usize,
    eps: f64,
    ensemble: *const LyapEnsemble,
    trials: usize,
    seed: u64,
    out: *mut f64,
) -> LyapStatus {
    guarded(|| {
        if x.is_null() || out.is_null() {
            return LyapStatus::NullPointer;
        }
        let Some(handle) = (unsafe { ensemble.as_ref() }) else {
            return LyapStatus::NullPointer;
        };
        let v = DVector::from_column_slice(unsafe { slice::from_raw_parts(x, n) });
        match small_ball_estimate(&v, eps, &handle.spec, trials, seed) {
            Ok(p) => {
                unsafe { ptr::write(out, p) };
                LyapStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lyap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// RNG algorithm identifier as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lyap_rng_algorithm() -> *const c_char {
    concat!("chacha12", "\0").as_ptr() as *const c_char
}

const _STATUS_IS_INT_SIZED: () = assert!(std::mem::size_of::<LyapStatus>() <= std::mem::size_of::<c_int>());
