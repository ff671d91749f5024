//! C interface to the `mecfl` simulator.
//!
//! Every fallible function returns a [`MecflStatus`]; on failure the message
//! is available from [`mecfl_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mecfl::io::{self as mio, ExperimentSpec, Scenario};
use mecfl::model::{AllocationState, UserAllocation, UserProfile};
use mecfl::orchestrator::{self, ExperimentResult};
use mecfl::{optimizer, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MecflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A value broke a documented range or consistency rule.
    Validation = 3,
    /// A closed form hit a zero divisor or an empty simplex.
    Numeric = 4,
    Config = 5,
    Io = 6,
    /// Malformed dataset file.
    Data = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MecflScenario {
    Proposed = 0,
    Traditional = 1,
    Centralized = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MecflField {
    Delta = 0,
    Gamma = 1,
    UplinkOffload = 2,
    UplinkWeight = 3,
    LambdaOffload = 4,
    LambdaLocal = 5,
}

/// One mobile user.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MecflUser {
    pub transmit_power: f64,
    pub channel_gain: f64,
    pub cpu_hz: f64,
    pub energy_budget: f64,
    pub dataset_size: u64,
}

/// Decision variables of one user.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MecflUserAllocation {
    pub delta: f64,
    pub gamma: f64,
    pub uplink_offload: f64,
    pub uplink_weight: f64,
}

/// Scalar metrics of one iteration.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MecflRoundSummary {
    pub iteration: u64,
    pub t_edge: f64,
    pub t_total: f64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub weighted_score: f64,
}

/// Experiment description.
pub struct MecflSpec(ExperimentSpec);

/// Outcome of a run.
pub struct MecflResult(ExperimentResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MecflStatus {
    match e.root() {
        Error::Validation { .. }
        | Error::SumExceedsOne { .. }
        | Error::OutOfRange { .. }
        | Error::LengthMismatch { .. }
        | Error::EmptyDataset
        | Error::InconsistentSizes(_)
        | Error::InstanceTooLarge(_) => MecflStatus::Validation,
        Error::DegenerateDivisor { .. } | Error::AllZeroWeights(_) | Error::NoFeasiblePoint | Error::NoSignChange { .. } => {
            MecflStatus::Numeric
        }
        Error::BadMagic { .. } | Error::CountMismatch { .. } | Error::TruncatedFile { .. } => MecflStatus::Data,
        Error::Config(_) | Error::Json(_) => MecflStatus::Config,
        Error::Io(_) | Error::Csv(_) => MecflStatus::Io,
        Error::Iteration { .. } => unreachable!("root strips iteration context"),
    }
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), (MecflStatus, String)>) -> MecflStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MecflStatus::Ok
        }
        Ok(Err((status, msg))) => {
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
            MecflStatus::Panic
        }
    }
}

fn lib(e: Error) -> (MecflStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MecflStatus, String) {
    (MecflStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (MecflStatus, String) {
    (MecflStatus::InvalidArgument, msg.into())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (MecflStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], (MecflStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Message of the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn mecfl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Default experiment: 10 users, 200 synthetic samples each.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn mecfl_spec_default(out: *mut *mut MecflSpec) -> MecflStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(MecflSpec(ExperimentSpec::default())));
        Ok(())
    })
}

/// Parses an experiment from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mecfl_spec_from_toml(toml: *const c_char, out: *mut *mut MecflSpec) -> MecflStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(toml, "toml")?;
        let spec = ExperimentSpec::from_toml(text).map_err(lib)?;
        *out = Box::into_raw(Box::new(MecflSpec(spec)));
        Ok(())
    })
}

/// Reads an experiment from a TOML file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mecfl_spec_load(path: *const c_char, out: *mut *mut MecflSpec) -> MecflStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = ExperimentSpec::load(str_arg(path, "path")?).map_err(lib)?;
        *out = Box::into_raw(Box::new(MecflSpec(spec)));
        Ok(())
    })
}

/// # Safety
/// `spec` must be NULL or a handle from a `mecfl_spec_*` constructor that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn mecfl_spec_free(spec: *mut MecflSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

unsafe fn spec_mut<'a>(spec: *mut MecflSpec) -> Result<&'a mut ExperimentSpec, (MecflStatus, String)> {
    spec.as_mut().map(|s| &mut s.0).ok_or_else(|| null("spec"))
}

unsafe fn spec_ref<'a>(spec: *const MecflSpec) -> Result<&'a ExperimentSpec, (MecflStatus, String)> {
    spec.as_ref().map(|s| &s.0).ok_or_else(|| null("spec"))
}

/// # Safety
/// `spec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mecfl_spec_set_seed(spec: *mut MecflSpec, seed: u64) -> MecflStatus {
    guard(|| {
        spec_mut(spec)?.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `spec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mecfl_spec_set_users(spec: *mut MecflSpec, users: usize) -> MecflStatus {
    guard(|| {
        if users == 0 {
            return Err(invalid("users must be >= 1"));
        }
        spec_mut(spec)?.user_count = users;
        Ok(())
    })
}

/// # Safety
/// `spec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mecfl_spec_set_max_iterations(spec: *mut MecflSpec, max_iterations: usize) -> MecflStatus {
    guard(|| {
        if max_iterations == 0 {
            return Err(invalid("max_iterations must be >= 1"));
        }
        spec_mut(spec)?.max_iterations = max_iterations;
        Ok(())
    })
}

/// # Safety
/// `spec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mecfl_spec_set_scenario(spec: *mut MecflSpec, scenario: MecflScenario) -> MecflStatus {
    guard(|| {
        spec_mut(spec)?.scenario = match scenario {
            MecflScenario::Proposed => Scenario::Proposed,
            MecflScenario::Traditional => Scenario::Traditional,
            MecflScenario::Centralized => Scenario::Centralized,
        };
        Ok(())
    })
}

/// Builds the population described by `spec` and runs its scenario.
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mecfl_run(spec: *const MecflSpec, out: *mut *mut MecflResult) -> MecflStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = spec_ref(spec)?;
        spec.validate().map_err(lib)?;
        let pop = mio::synthesize_users(spec).map_err(lib)?.population;
        let cfg = spec.system_config();
        let r = match spec.scenario {
            Scenario::Proposed => orchestrator::run_proposed(&pop, &cfg, spec.max_iterations),
            Scenario::Traditional => orchestrator::run_traditional(&pop, &cfg, spec.max_iterations),
            Scenario::Centralized => orchestrator::run_centralized(&pop, &cfg, spec.max_iterations),
            s => return Err(invalid(format!("{s} is a sweep and cannot be run here"))),
        }
        .map_err(lib)?;
        *out = Box::into_raw(Box::new(MecflResult(r)));
        Ok(())
    })
}

/// # Safety
/// `result` must be NULL or a handle from [`mecfl_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mecfl_result_free(result: *mut MecflResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

unsafe fn result_ref<'a>(r: *const MecflResult) -> Result<&'a ExperimentResult, (MecflStatus, String)> {
    r.as_ref().map(|r| &r.0).ok_or_else(|| null("result"))
}

/// Number of iterations in the trace; 0 for a NULL handle.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mecfl_result_iterations(result: *const MecflResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.iterations_used)
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mecfl_result_converged(result: *const MecflResult) -> bool {
    result.as_ref().is_some_and(|r| r.0.converged)
}

/// Number of users; 0 for a NULL handle.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mecfl_result_users(result: *const MecflResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.final_allocation.len())
}

/// Metrics of trace entry `index` (0-based).
///
/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mecfl_result_round(result: *const MecflResult, index: usize, out: *mut MecflRoundSummary) -> MecflStatus {
    guard(|| {
        let r = result_ref(result)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let rec = r
            .trace
            .get(index)
            .ok_or_else(|| invalid(format!("index {index} beyond {} iterations", r.trace.len())))?;
        let m = &rec.metrics;
        *out = MecflRoundSummary {
            iteration: rec.iteration as u64,
            t_edge: m.t_edge,
            t_total: m.t_total,
            train_loss: m.train_loss,
            test_loss: m.test_loss,
            weighted_score: m.weighted_score,
        };
        Ok(())
    })
}

/// Copies one per-user field of the final allocation into `buf`.
///
/// `len` must be at least [`mecfl_result_users`].
///
/// # Safety
/// `result` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mecfl_result_final_allocation(
    result: *const MecflResult,
    field: MecflField,
    buf: *mut f64,
    len: usize,
) -> MecflStatus {
    guard(|| {
        let a = &result_ref(result)?.final_allocation;
        if len < a.len() {
            return Err(invalid(format!("buffer holds {len}, need {}", a.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let src = match field {
            MecflField::Delta => a.delta(),
            MecflField::Gamma => a.gamma(),
            MecflField::UplinkOffload => a.uplink_offload(),
            MecflField::UplinkWeight => a.uplink_weight(),
            MecflField::LambdaOffload => a.lambda_offload(),
            MecflField::LambdaLocal => a.lambda_local(),
        };
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        Ok(())
    })
}

fn profile(i: usize, u: &MecflUser) -> UserProfile {
    UserProfile {
        id: i,
        transmit_power: u.transmit_power,
        channel_gain: u.channel_gain,
        cpu_hz: u.cpu_hz,
        energy_budget: u.energy_budget,
        dataset_size: u.dataset_size as usize,
    }
}

fn user_alloc(a: &MecflUserAllocation) -> UserAllocation {
    UserAllocation {
        delta: a.delta,
        gamma: a.gamma,
        uplink_offload: a.uplink_offload,
        uplink_weight: a.uplink_weight,
    }
}

/// Builds a population allocation; `lambda_offload` may be NULL for 0.5.
unsafe fn population(
    users: *const MecflUser,
    allocs: *const MecflUserAllocation,
    lambda_offload: *const f64,
    n: usize,
) -> Result<(Vec<UserProfile>, AllocationState), (MecflStatus, String)> {
    if n == 0 {
        return Err(invalid("need at least one user"));
    }
    let users = slice_arg(users, n, "users")?;
    let allocs = slice_arg(allocs, n, "allocations")?;
    let lt: Vec<f64> = if lambda_offload.is_null() {
        vec![0.5; n]
    } else {
        slice_arg(lambda_offload, n, "lambda_offload")?.to_vec()
    };
    let profiles: Vec<UserProfile> = users.iter().enumerate().map(|(i, u)| profile(i, u)).collect();
    for p in &profiles {
        p.validate().map_err(lib)?;
    }
    let state = AllocationState::new(
        allocs.iter().map(|a| a.delta).collect(),
        allocs.iter().map(|a| a.gamma).collect(),
        allocs.iter().map(|a| a.uplink_offload).collect(),
        allocs.iter().map(|a| a.uplink_weight).collect(),
        lt.clone(),
        lt.iter().map(|l| 1.0 - l).collect(),
    )
    .map_err(lib)?;
    Ok((profiles, state))
}

/// CPU-share best response of one user under `spec`'s system constants.
///
/// # Safety
/// All pointers must be valid; `budget_exhausted` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn mecfl_solve_gamma(
    spec: *const MecflSpec,
    user: *const MecflUser,
    alloc: *const MecflUserAllocation,
    weight_dim: usize,
    gamma: *mut f64,
    budget_exhausted: *mut bool,
) -> MecflStatus {
    guard(|| {
        let cfg = spec_ref(spec)?.system_config();
        let u = profile(0, user.as_ref().ok_or_else(|| null("user"))?);
        u.validate().map_err(lib)?;
        let a = user_alloc(alloc.as_ref().ok_or_else(|| null("alloc"))?);
        let out = gamma.as_mut().ok_or_else(|| null("gamma"))?;
        let s = optimizer::solve_gamma(&u, &a, weight_dim, &cfg).map_err(lib)?;
        *out = s.gamma;
        if let Some(flag) = budget_exhausted.as_mut() {
            *flag = s.budget_exhausted;
        }
        Ok(())
    })
}

/// Offload-fraction best response of user `index` among `n` users.
///
/// # Safety
/// `users` and `allocs` must hold `n` entries; `lambda_offload` is NULL or
/// holds `n` entries; `delta` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mecfl_solve_delta(
    spec: *const MecflSpec,
    users: *const MecflUser,
    allocs: *const MecflUserAllocation,
    n: usize,
    index: usize,
    weight_dim: usize,
    delta: *mut f64,
) -> MecflStatus {
    guard(|| {
        let cfg = spec_ref(spec)?.system_config();
        let (profiles, state) = population(users, allocs, ptr::null(), n)?;
        if index >= n {
            return Err(invalid(format!("index {index} out of {n} users")));
        }
        let out = delta.as_mut().ok_or_else(|| null("delta"))?;
        *out = optimizer::solve_delta(index, &profiles, &state, weight_dim, &cfg).map_err(lib)?;
        Ok(())
    })
}

/// Bandwidth shares for all `n` users. `lambda_offload` may be NULL (0.5).
///
/// # Safety
/// Array arguments must hold `n` entries; `uplink_offload` and
/// `uplink_weight` must each have room for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn mecfl_solve_uplink(
    spec: *const MecflSpec,
    users: *const MecflUser,
    allocs: *const MecflUserAllocation,
    lambda_offload: *const f64,
    n: usize,
    weight_dim: usize,
    uplink_offload: *mut f64,
    uplink_weight: *mut f64,
) -> MecflStatus {
    guard(|| {
        let cfg = spec_ref(spec)?.system_config();
        let (profiles, state) = population(users, allocs, lambda_offload, n)?;
        if uplink_offload.is_null() || uplink_weight.is_null() {
            return Err(null("output buffer"));
        }
        let (off, up) = optimizer::solve_uplink(&profiles, &state, weight_dim, &cfg).map_err(lib)?;
        ptr::copy_nonoverlapping(off.as_ptr(), uplink_offload, n);
        ptr::copy_nonoverlapping(up.as_ptr(), uplink_weight, n);
        Ok(())
    })
}
