//! C ABI over the `dpogd` library.
//!
//! Every fallible function returns a [`DpogdStatus`]; on failure the message
//! is kept per thread and can be read with [`dpogd_last_error`]. Handles are
//! opaque and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dpogd::error::Error;
use dpogd::graph::ContractionConstants;
use dpogd::harness::{run_experiment, write_outputs, ExperimentConfig, ExperimentResult};
use dpogd::prox::{prox_composite, NonsmoothSpec};
use dpogd::schedule::{ConsensusSchedule, ScheduleKind};
use dpogd::RealVector;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpogdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Divergence = 4,
    OracleFailure = 5,
    Io = 6,
    OutOfRange = 7,
    Internal = 8,
    Panic = 9,
}

impl From<&Error> for DpogdStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => DpogdStatus::Config,
            Error::Divergence { .. } => DpogdStatus::Divergence,
            Error::OracleFailure { .. } => DpogdStatus::OracleFailure,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Plot(_) => DpogdStatus::Io,
            Error::OutOfRange { .. } => DpogdStatus::OutOfRange,
            Error::ScheduleInfeasible(_)
            | Error::InvalidNetwork(_)
            | Error::InvalidIota { .. }
            | Error::Underflow(_)
            | Error::DimensionMismatch(_)
            | Error::InsufficientHorizon { .. }
            | Error::InvalidArgument(_) => DpogdStatus::InvalidArgument,
            _ => DpogdStatus::Internal,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: DpogdStatus, msg: impl Into<String>) -> DpogdStatus {
    set_error(msg.into());
    status
}

fn fail_with(e: Error) -> DpogdStatus {
    let status = DpogdStatus::from(&e);
    fail(status, e.to_string())
}

/// Runs `f`, mapping panics to [`DpogdStatus::Panic`].
fn guarded(f: impl FnOnce() -> DpogdStatus) -> DpogdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(DpogdStatus::Panic, msg)
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, DpogdStatus> {
    if s.is_null() {
        return Err(fail(DpogdStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(DpogdStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(DpogdStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dpogd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Clears the message returned by [`dpogd_last_error`].
#[no_mangle]
pub extern "C" fn dpogd_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn dpogd_status_name(status: DpogdStatus) -> *const c_char {
    let s: &'static CStr = match status {
        DpogdStatus::Ok => c"ok",
        DpogdStatus::NullPointer => c"null pointer",
        DpogdStatus::InvalidArgument => c"invalid argument",
        DpogdStatus::Config => c"configuration error",
        DpogdStatus::Divergence => c"divergence",
        DpogdStatus::OracleFailure => c"oracle failure",
        DpogdStatus::Io => c"i/o error",
        DpogdStatus::OutOfRange => c"out of range",
        DpogdStatus::Internal => c"internal error",
        DpogdStatus::Panic => c"panic",
    };
    s.as_ptr()
}

// ---- schedules ----

/// Opaque consensus schedule.
pub struct DpogdSchedule(ConsensusSchedule);

fn new_schedule(kind: ScheduleKind, horizon: usize, out: *mut *mut DpogdSchedule) -> DpogdStatus {
    non_null!(out);
    guarded(|| match ConsensusSchedule::build(kind, horizon) {
        Ok(s) => {
            unsafe { *out = Box::into_raw(Box::new(DpogdSchedule(s))) };
            DpogdStatus::Ok
        }
        Err(e) => fail_with(e),
    })
}

/// `S(k) = ⌊T^u⌋`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dpogd_schedule_constant(
    u: f64,
    horizon: usize,
    out: *mut *mut DpogdSchedule,
) -> DpogdStatus {
    new_schedule(ScheduleKind::Constant { u }, horizon, out)
}

/// `S(k) = ⌊c ln k⌋`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dpogd_schedule_logarithmic(
    c: f64,
    horizon: usize,
    out: *mut *mut DpogdSchedule,
) -> DpogdStatus {
    new_schedule(ScheduleKind::Logarithmic { c }, horizon, out)
}

/// Explicit `S(k)` list; the last entry repeats.
///
/// # Safety
/// `steps` must point to `len` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dpogd_schedule_explicit(
    steps: *const usize,
    len: usize,
    horizon: usize,
    out: *mut *mut DpogdSchedule,
) -> DpogdStatus {
    non_null!(steps);
    let steps = std::slice::from_raw_parts(steps, len).to_vec();
    new_schedule(ScheduleKind::Explicit { steps }, horizon, out)
}

/// Number of iterations `K` that fit the horizon.
///
/// # Safety
/// `s` must be a live schedule handle or null.
#[no_mangle]
pub unsafe extern "C" fn dpogd_schedule_iterations(s: *const DpogdSchedule) -> usize {
    s.as_ref().map_or(0, |s| s.0.iterations())
}

/// Sample time `t_k` and consensus count `S(k)` of iteration `k` (1-based).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dpogd_schedule_iteration(
    s: *const DpogdSchedule,
    k: usize,
    sample_time: *mut usize,
    steps: *mut usize,
) -> DpogdStatus {
    non_null!(s, sample_time, steps);
    let s = &(*s).0;
    if k == 0 || k > s.iterations() {
        return fail(
            DpogdStatus::OutOfRange,
            format!("iteration {k} outside 1..={}", s.iterations()),
        );
    }
    *sample_time = s.sample_time(k);
    *steps = s.consensus_steps(k);
    DpogdStatus::Ok
}

/// # Safety
/// `s` must be a handle from a `dpogd_schedule_*` constructor or null.
#[no_mangle]
pub unsafe extern "C" fn dpogd_schedule_free(s: *mut DpogdSchedule) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

// ---- contraction constants ----

/// Plain copy of the contraction constants.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpogdContraction {
    pub eta: f64,
    pub b: usize,
    pub nodes: usize,
    pub omega: f64,
    pub big_gamma: f64,
    pub gamma: f64,
    pub log_gamma: f64,
}

impl From<ContractionConstants> for DpogdContraction {
    fn from(c: ContractionConstants) -> Self {
        Self {
            eta: c.eta,
            b: c.b,
            nodes: c.n,
            omega: c.omega,
            big_gamma: c.big_gamma,
            gamma: c.gamma,
            log_gamma: c.log_gamma,
        }
    }
}

/// `(Γ, γ)` for weight floor `eta`, `nodes` agents and window `b`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dpogd_contraction(
    eta: f64,
    nodes: usize,
    b: usize,
    out: *mut DpogdContraction,
) -> DpogdStatus {
    non_null!(out);
    match ContractionConstants::new(eta, nodes, b) {
        Ok(c) => {
            *out = c.into();
            DpogdStatus::Ok
        }
        Err(e) => fail_with(e),
    }
}

/// `Γ γ^{s−1}`.
#[no_mangle]
pub extern "C" fn dpogd_contraction_bound(c: DpogdContraction, s: usize) -> f64 {
    c.big_gamma * (c.log_gamma * (s as f64 - 1.0)).exp()
}

// ---- proximal operator ----

/// Proximal map of `α(σ‖·‖₁ + ι_{‖·‖≤R})` applied to `x[0..n]`, written to
/// `out[0..n]`. Pass `radius = INFINITY` for no ball.
///
/// # Safety
/// `x` and `out` must point to `n` values.
#[no_mangle]
pub unsafe extern "C" fn dpogd_prox(
    x: *const f64,
    n: usize,
    alpha: f64,
    sigma: f64,
    radius: f64,
    out: *mut f64,
) -> DpogdStatus {
    non_null!(x, out);
    if alpha.is_nan() || alpha <= 0.0 {
        return fail(
            DpogdStatus::InvalidArgument,
            format!("alpha must be positive, got {alpha}"),
        );
    }
    if !(sigma >= 0.0 && radius > 0.0) {
        return fail(
            DpogdStatus::InvalidArgument,
            format!("need sigma >= 0 and radius > 0, got {sigma}, {radius}"),
        );
    }
    let spec = NonsmoothSpec::new(sigma, radius);
    let v = RealVector::from_column_slice(std::slice::from_raw_parts(x, n));
    let p = prox_composite(&v, alpha, &spec);
    std::slice::from_raw_parts_mut(out, n).copy_from_slice(p.as_slice());
    DpogdStatus::Ok
}

// ---- experiments ----

/// Opaque validated experiment configuration.
pub struct DpogdConfig(ExperimentConfig);

/// Opaque experiment result.
pub struct DpogdResult {
    inner: ExperimentResult,
    names: Vec<CString>,
}

/// Parses and validates a TOML configuration.
///
/// # Safety
/// `toml` must be a nul-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dpogd_config_parse(
    toml: *const c_char,
    out: *mut *mut DpogdConfig,
) -> DpogdStatus {
    non_null!(out);
    let text = match read_str(toml, "toml") {
        Ok(t) => t,
        Err(s) => return s,
    };
    match ExperimentConfig::from_toml_str(text) {
        Ok(c) => {
            *out = Box::into_raw(Box::new(DpogdConfig(c)));
            DpogdStatus::Ok
        }
        Err(e) => fail_with(e),
    }
}

/// Loads a TOML configuration file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dpogd_config_load(
    path: *const c_char,
    out: *mut *mut DpogdConfig,
) -> DpogdStatus {
    non_null!(out);
    let path = match read_str(path, "path") {
        Ok(p) => p,
        Err(s) => return s,
    };
    match dpogd::harness::load_config(Path::new(path)) {
        Ok(c) => {
            *out = Box::into_raw(Box::new(DpogdConfig(c)));
            DpogdStatus::Ok
        }
        Err(e) => fail_with(e),
    }
}

/// Replaces the seed list of `cfg`.
///
/// # Safety
/// `cfg` must be live and `seeds` must point to `len > 0` values.
#[no_mangle]
pub unsafe extern "C" fn dpogd_config_set_seeds(
    cfg: *mut DpogdConfig,
    seeds: *const u64,
    len: usize,
) -> DpogdStatus {
    non_null!(cfg, seeds);
    if len == 0 {
        return fail(DpogdStatus::InvalidArgument, "seed list must be non-empty");
    }
    (*cfg).0.seeds = std::slice::from_raw_parts(seeds, len).to_vec();
    DpogdStatus::Ok
}

/// # Safety
/// `cfg` must be a handle from `dpogd_config_*` or null.
#[no_mangle]
pub unsafe extern "C" fn dpogd_config_free(cfg: *mut DpogdConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs every configured algorithm on every seed.
///
/// # Safety
/// `cfg` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dpogd_experiment_run(
    cfg: *const DpogdConfig,
    out: *mut *mut DpogdResult,
) -> DpogdStatus {
    non_null!(cfg, out);
    let cfg = &(*cfg).0;
    guarded(|| match run_experiment(cfg) {
        Ok(r) => {
            let names = r
                .summary
                .algorithms
                .iter()
                .map(|a| CString::new(a.algorithm.as_str()).expect("ascii name"))
                .collect();
            *out = Box::into_raw(Box::new(DpogdResult { inner: r, names }));
            DpogdStatus::Ok
        }
        Err(e) => fail_with(e),
    })
}

/// Number of algorithms in the result.
///
/// # Safety
/// `r` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn dpogd_result_algorithms(r: *const DpogdResult) -> usize {
    r.as_ref().map_or(0, |r| r.names.len())
}

/// Name of algorithm `i`; owned by the result.
///
/// # Safety
/// `r` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn dpogd_result_algorithm_name(
    r: *const DpogdResult,
    i: usize,
) -> *const c_char {
    r.as_ref()
        .and_then(|r| r.names.get(i))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Median final `Reg_T / T` of algorithm `i`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dpogd_result_final_regret(
    r: *const DpogdResult,
    i: usize,
    out: *mut f64,
) -> DpogdStatus {
    non_null!(r, out);
    let r = &*r;
    match r.inner.summary.algorithms.get(i) {
        Some(a) => {
            *out = a.final_regret_over_t;
            DpogdStatus::Ok
        }
        None => fail(
            DpogdStatus::OutOfRange,
            format!("algorithm index {i} out of range"),
        ),
    }
}

/// Median final `C_T / T`.
///
/// # Safety
/// `r` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn dpogd_result_path_over_t(r: *const DpogdResult) -> f64 {
    r.as_ref()
        .map_or(f64::NAN, |r| r.inner.summary.final_path_over_t)
}

/// Writes the CSV/JSON bundle under `dir`.
///
/// # Safety
/// `r` must be live and `dir` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn dpogd_result_write(
    r: *const DpogdResult,
    dir: *const c_char,
) -> DpogdStatus {
    non_null!(r);
    let dir = match read_str(dir, "dir") {
        Ok(d) => d,
        Err(s) => return s,
    };
    match write_outputs(&(*r).inner, Path::new(dir)) {
        Ok(()) => DpogdStatus::Ok,
        Err(e) => fail_with(e),
    }
}

/// # Safety
/// `r` must be a handle from [`dpogd_experiment_run`] or null.
#[no_mangle]
pub unsafe extern "C" fn dpogd_result_free(r: *mut DpogdResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
