//! C ABI over `shadow-recovery`.
//!
//! Objects are opaque heap handles created by `sr_*_new`-style constructors and released with
//! the matching `sr_*_free`. Every fallible call returns an [`SrStatus`]; on failure the message
//! is available from [`sr_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use shadow_recovery::channel::ChannelConfig;
use shadow_recovery::observable::Heisenberg;
use shadow_recovery::oracle::haar_random_state;
use shadow_recovery::recovery::{backward_observable, recover_expectation_with, RecoveryError};
use shadow_recovery::shadow::{learn_eigenvalues, plan_sample_size};
use shadow_recovery::{Channel, EigenvalueEstimates, Observable, PauliChannel, PauliString};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    BelowFloor = 5,
    Recovery = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

pub struct SrChannel(Channel);

pub struct SrObservable(Observable);

pub struct SrEigenvalues(EigenvalueEstimates);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(SrStatus, String);

impl Failure {
    fn new(status: SrStatus, msg: impl ToString) -> Self {
        Failure(status, msg.to_string())
    }
}

impl From<RecoveryError> for Failure {
    fn from(e: RecoveryError) -> Self {
        let status = if e.is_floor_violation() { SrStatus::BelowFloor } else { SrStatus::Recovery };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(SrStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(SrStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(SrStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::new(SrStatus::NullPointer, format!("{what} is null")))
}

fn pauli(label: &str) -> Result<PauliString, Failure> {
    label.parse().map_err(|e| Failure::new(SrStatus::Parse, format!("{label:?}: {e}")))
}

/// Message of the last failed call on this thread. Owned by the library.
#[no_mangle]
pub extern "C" fn sr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a channel from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sr_channel_from_json(json: *const c_char, out: *mut *mut SrChannel) -> SrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(json, "json")?;
        let ch = ChannelConfig::from_json(text)
            .and_then(|c| c.build())
            .map_err(|e| Failure::new(SrStatus::Parse, e))?;
        *out = Box::into_raw(Box::new(SrChannel(ch)));
        Ok(())
    })
}

/// The two-qubit product Pauli channel used by the reference experiment.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sr_channel_reference(out: *mut *mut SrChannel) -> SrStatus {
    guard(|| {
        *out_arg(out, "out")? = Box::into_raw(Box::new(SrChannel(PauliChannel::reference().into())));
        Ok(())
    })
}

/// # Safety
/// `channel` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn sr_channel_free(channel: *mut SrChannel) {
    if !channel.is_null() {
        drop(Box::from_raw(channel));
    }
}

/// Number of qubits, or 0 for a null handle.
///
/// # Safety
/// `channel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sr_channel_num_qubits(channel: *const SrChannel) -> usize {
    channel.as_ref().map_or(0, |c| c.0.num_qubits())
}

/// Exact `2^{-n} tr(P E(P))` for the Pauli label `pauli_label`.
///
/// # Safety
/// `channel` must be a live handle, `pauli_label` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sr_channel_eigenvalue(
    channel: *const SrChannel,
    pauli_label: *const c_char,
    out: *mut f64,
) -> SrStatus {
    guard(|| {
        let ch = &ref_arg(channel, "channel")?.0;
        let p = pauli(str_arg(pauli_label, "pauli")?)?;
        if p.num_qubits() != ch.num_qubits() {
            return Err(Failure::new(SrStatus::InvalidArgument, "Pauli length does not match the channel"));
        }
        *out_arg(out, "out")? = ch.adjoint_entry(&p, &p);
        Ok(())
    })
}

/// Parses `<label> <coefficient>` lines.
///
/// # Safety
/// `text` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sr_observable_parse(text: *const c_char, out: *mut *mut SrObservable) -> SrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let o = Observable::parse(str_arg(text, "text")?).map_err(|e| Failure::new(SrStatus::Parse, e))?;
        *out = Box::into_raw(Box::new(SrObservable(o)));
        Ok(())
    })
}

/// Reference Heisenberg chain on `n` qubits, normalized to unit spectral norm.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sr_observable_heisenberg(n: usize, field_on_all: bool, out: *mut *mut SrObservable) -> SrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let o = Heisenberg { field_on_all, ..Heisenberg::reference(n) }
            .build()
            .and_then(|o| o.normalized())
            .map_err(|e| Failure::new(SrStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(SrObservable(o)));
        Ok(())
    })
}

/// # Safety
/// `observable` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sr_observable_free(observable: *mut SrObservable) {
    if !observable.is_null() {
        drop(Box::from_raw(observable));
    }
}

/// Number of Pauli terms, or 0 for a null handle.
///
/// # Safety
/// `observable` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sr_observable_len(observable: *const SrObservable) -> usize {
    observable.as_ref().map_or(0, |o| o.0.len())
}

/// Term `index` in label order. Writes the NUL-terminated label into `label` (`capacity`
/// bytes, at least qubits + 1) and the coefficient into `coefficient`.
///
/// # Safety
/// `observable` must be a live handle, `label` must hold `capacity` bytes and `coefficient`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn sr_observable_term(
    observable: *const SrObservable,
    index: usize,
    label: *mut c_char,
    capacity: usize,
    coefficient: *mut f64,
) -> SrStatus {
    guard(|| {
        let o = &ref_arg(observable, "observable")?.0;
        let (p, c) = o
            .terms()
            .iter()
            .nth(index)
            .ok_or_else(|| Failure::new(SrStatus::InvalidArgument, format!("term {index} of {}", o.len())))?;
        if label.is_null() {
            return Err(Failure::new(SrStatus::NullPointer, "label is null"));
        }
        let text = p.label();
        if text.len() + 1 > capacity {
            return Err(Failure::new(SrStatus::BufferTooSmall, format!("label needs {} bytes", text.len() + 1)));
        }
        std::ptr::copy_nonoverlapping(text.as_ptr().cast::<c_char>(), label, text.len());
        *label.add(text.len()) = 0;
        *out_arg(coefficient, "coefficient")? = *c;
        Ok(())
    })
}

/// Eigenvalue estimates for every Pauli of weight `1..=k` from `shadows` simulated channel
/// shadows.
///
/// # Safety
/// `channel` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sr_learn_eigenvalues(
    channel: *const SrChannel,
    shadows: u64,
    k: usize,
    seed: u64,
    out: *mut *mut SrEigenvalues,
) -> SrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ch = &ref_arg(channel, "channel")?.0;
        let est =
            learn_eigenvalues(ch, shadows, k, seed).map_err(|e| Failure::new(SrStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(SrEigenvalues(est)));
        Ok(())
    })
}

/// Exact eigenvalues of a Pauli channel for every Pauli of weight `1..=k`.
///
/// # Safety
/// `channel` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sr_exact_eigenvalues(channel: *const SrChannel, k: usize, out: *mut *mut SrEigenvalues) -> SrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ch = ref_arg(channel, "channel")?
            .0
            .as_pauli()
            .ok_or_else(|| Failure::new(SrStatus::InvalidArgument, "exact eigenvalues need a Pauli channel"))?;
        let est = EigenvalueEstimates::exact(ch, k).map_err(|e| Failure::new(SrStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(SrEigenvalues(est)));
        Ok(())
    })
}

/// # Safety
/// `estimates` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sr_eigenvalues_free(estimates: *mut SrEigenvalues) {
    if !estimates.is_null() {
        drop(Box::from_raw(estimates));
    }
}

/// Estimate for one Pauli label. The identity always gives 1.
///
/// # Safety
/// `estimates` must be a live handle, `pauli_label` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sr_eigenvalues_get(
    estimates: *const SrEigenvalues,
    pauli_label: *const c_char,
    out: *mut f64,
) -> SrStatus {
    guard(|| {
        let est = &ref_arg(estimates, "estimates")?.0;
        let p = pauli(str_arg(pauli_label, "pauli")?)?;
        let v = est
            .get(&p)
            .ok_or_else(|| Failure::new(SrStatus::InvalidArgument, format!("no estimate for {p}")))?;
        *out_arg(out, "out")? = v;
        Ok(())
    })
}

/// Divides each estimate by `factor^{|P|}` in place.
///
/// # Safety
/// `estimates` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sr_eigenvalues_divide_spam(estimates: *mut SrEigenvalues, factor: f64) -> SrStatus {
    guard(|| {
        let est = out_arg(estimates, "estimates")?;
        if !(factor > 0.0) {
            return Err(Failure::new(SrStatus::InvalidArgument, "factor must be positive"));
        }
        est.0 = est.0.divide_spam(factor);
        Ok(())
    })
}

/// Rescaled observable `Σ α_P / λ̂_P · P`. Eigenvalues below `floor` in magnitude fail with
/// `SR_STATUS_BELOW_FLOOR`.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sr_backward_observable(
    observable: *const SrObservable,
    estimates: *const SrEigenvalues,
    floor: f64,
    out: *mut *mut SrObservable,
) -> SrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let o = &ref_arg(observable, "observable")?.0;
        let est = &ref_arg(estimates, "estimates")?.0;
        let b = backward_observable(o, est, floor)?;
        *out = Box::into_raw(Box::new(SrObservable(b.to_observable())));
        Ok(())
    })
}

/// `f = Σ ᾱ_P ⟨P⟩` from caller-supplied noisy expectations, given as `count` parallel
/// arrays of Pauli labels and values.
///
/// # Safety
/// Handles must be live, `labels` and `values` must hold `count` entries each, and `out`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn sr_recover_expectation(
    observable: *const SrObservable,
    estimates: *const SrEigenvalues,
    floor: f64,
    labels: *const *const c_char,
    values: *const f64,
    count: usize,
    out: *mut f64,
) -> SrStatus {
    guard(|| {
        let o = &ref_arg(observable, "observable")?.0;
        let est = &ref_arg(estimates, "estimates")?.0;
        if count > 0 && (labels.is_null() || values.is_null()) {
            return Err(Failure::new(SrStatus::NullPointer, "labels or values is null"));
        }
        let mut given = BTreeMap::new();
        for i in 0..count {
            given.insert(pauli(str_arg(*labels.add(i), "label")?)?.unsigned(), *values.add(i));
        }
        let b = backward_observable(o, est, floor)?;
        *out_arg(out, "out")? = recover_expectation_with(&b, |p| given.get(p).copied())?;
        Ok(())
    })
}

/// Runs recovery on a Haar-random state through `channel`, with exact noisy expectations.
/// Writes the recovered value, the ideal `tr(O σ)` and the unprocessed `tr(O E(σ))`.
///
/// # Safety
/// Handles must be live and the three output pointers valid.
#[no_mangle]
pub unsafe extern "C" fn sr_recover_haar_state(
    channel: *const SrChannel,
    observable: *const SrObservable,
    estimates: *const SrEigenvalues,
    floor: f64,
    state_seed: u64,
    recovered: *mut f64,
    ideal: *mut f64,
    unmitigated: *mut f64,
) -> SrStatus {
    guard(|| {
        let ch = &ref_arg(channel, "channel")?.0;
        let o = &ref_arg(observable, "observable")?.0;
        let est = &ref_arg(estimates, "estimates")?.0;
        let sigma = haar_random_state(ch.num_qubits(), state_seed)
            .map_err(|e| Failure::new(SrStatus::InvalidArgument, e))?;
        let noisy = sigma.apply_channel(ch).map_err(|e| Failure::new(SrStatus::InvalidArgument, e))?;
        let b = backward_observable(o, est, floor)?;
        let f = recover_expectation_with(&b, |p| Some(noisy.pauli_expectation(p)))?;
        *out_arg(recovered, "recovered")? = f;
        *out_arg(ideal, "ideal")? = sigma.expectation(o);
        *out_arg(unmitigated, "unmitigated")? = noisy.expectation(o);
        Ok(())
    })
}

/// Number of channel shadows for accuracy `epsilon` with failure probability `delta`.
/// Fails with `SR_STATUS_INVALID_ARGUMENT` if the count does not fit in 64 bits.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sr_plan_sample_size(
    epsilon: f64,
    delta: f64,
    n: usize,
    k: usize,
    d: usize,
    lambda_min: f64,
    out: *mut u64,
) -> SrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let plan = plan_sample_size(epsilon, delta, n, k, d, lambda_min)
            .map_err(|e| Failure::new(SrStatus::InvalidArgument, e))?;
        *out = u64::try_from(plan.samples)
            .map_err(|_| Failure::new(SrStatus::InvalidArgument, format!("{} samples overflow 64 bits", plan.samples)))?;
        Ok(())
    })
}
