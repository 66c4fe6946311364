//! C ABI for hapnet.
//!
//! Objects are opaque heap handles created by `*_new`/`*_from_*` functions
//! and released with the matching `*_free`. Every fallible call returns a
//! [`HapnetStatus`]; on failure [`hapnet_last_error`] describes the cause.
//! Panics are caught at the boundary and reported as `HAPNET_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hapnet::config::{Baseline, Config, SolverPath, UtilityKind};
use hapnet::error::Error;
use hapnet::harness::{self, PipelineRun};
use hapnet::scenario::{Scenario, Tier};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HapnetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Parse = 4,
    Infeasible = 5,
    Io = 6,
    Numeric = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HapnetPath {
    FrequencyPartitioning = 0,
    NearOptimal = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HapnetUtility {
    Msu = 0,
    Mmu = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HapnetBaseline {
    None = 0,
    UniformPower = 1,
    RandomAssociation = 2,
}

/// Configuration plus one generated scenario.
pub struct HapnetScenario {
    config: Config,
    scenario: Scenario,
    placement_objective: usize,
}

/// Outcome of one short-term solve.
pub struct HapnetReport {
    run: PipelineRun,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HapnetStatus {
    match e {
        Error::Config { .. } | Error::BackhaulCapacity { .. } => HapnetStatus::Config,
        Error::Parse(_) | Error::Json(_) | Error::Csv(_) => HapnetStatus::Parse,
        Error::Io(_) => HapnetStatus::Io,
        Error::Infeasible(_) => HapnetStatus::Infeasible,
        Error::NanValue { .. } | Error::NonPositivePsi(_) | Error::SingularLink(_) => HapnetStatus::Numeric,
        _ => HapnetStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (HapnetStatus, String)>) -> HapnetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HapnetStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HapnetStatus::Panic
        }
    }
}

fn lib(e: Error) -> (HapnetStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (HapnetStatus, String) {
    (HapnetStatus::NullPointer, format!("{name} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (HapnetStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn as_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (HapnetStatus, String)> {
    p.as_mut().ok_or_else(|| null(name))
}

fn new_scenario(config: Config, seed: u64) -> Result<Box<HapnetScenario>, (HapnetStatus, String)> {
    let scenario = config.scenario(seed).map_err(lib)?;
    Ok(Box::new(HapnetScenario { config, scenario, placement_objective: 0 }))
}

/// Message of the last failed call on this thread (empty after success).
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hapnet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hapnet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Scenario from the default configuration with `users` users.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn hapnet_scenario_new(users: usize, seed: u64, out: *mut *mut HapnetScenario) -> HapnetStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let mut config = Config::default();
        config.counts.users = users;
        config.validate().map_err(lib)?;
        *out = Box::into_raw(new_scenario(config, seed)?);
        Ok(())
    })
}

/// Scenario from a TOML configuration (or run manifest).
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hapnet_scenario_from_toml(
    toml: *const c_char,
    seed: u64,
    out: *mut *mut HapnetScenario,
) -> HapnetStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|_| (HapnetStatus::Parse, "toml is not UTF-8".to_string()))?;
        let config = Config::from_toml_str(text).map_err(lib)?;
        *out = Box::into_raw(new_scenario(config, seed)?);
        Ok(())
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hapnet_scenario_free(s: *mut HapnetScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Node counts of a scenario. Any output pointer may be null.
///
/// # Safety
/// `s` must be a valid handle; non-null outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hapnet_scenario_counts(
    s: *const HapnetScenario,
    users: *mut usize,
    tbs: *mut usize,
    haps: *mut usize,
    gateways: *mut usize,
) -> HapnetStatus {
    guard(|| {
        let s = &as_ref(s, "scenario")?.scenario;
        for (p, v) in [
            (users, s.users.len()),
            (tbs, s.tbs.len()),
            (haps, s.haps.len()),
            (gateways, s.gateways.len()),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Position of HAP `index` in meters.
///
/// # Safety
/// `s` must be a valid handle; `x`, `y`, `z` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hapnet_scenario_hap_position(
    s: *const HapnetScenario,
    index: usize,
    x: *mut f64,
    y: *mut f64,
    z: *mut f64,
) -> HapnetStatus {
    guard(|| {
        let s = &as_ref(s, "scenario")?.scenario;
        let p = s.haps.get(index).ok_or_else(|| {
            (HapnetStatus::InvalidArgument, format!("HAP index {index} out of range ({})", s.haps.len()))
        })?;
        *as_mut(x, "x")? = p.x;
        *as_mut(y, "y")? = p.y;
        *as_mut(z, "z")? = p.z;
        Ok(())
    })
}

/// Scenario as JSON. Release the string with [`hapnet_string_free`].
///
/// # Safety
/// `s` must be a valid handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hapnet_scenario_to_json(s: *const HapnetScenario, out: *mut *mut c_char) -> HapnetStatus {
    guard(|| {
        let s = as_ref(s, "scenario")?;
        let out = as_mut(out, "out")?;
        let text = serde_json::to_string(&s.scenario).map_err(|e| lib(e.into()))?;
        *out = CString::new(text).map_err(|e| (HapnetStatus::Parse, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `p` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hapnet_string_free(p: *mut c_char) {
    if !p.is_null() {
        drop(CString::from_raw(p));
    }
}

/// Runs the long-term placement stage and moves the scenario's HAPs.
/// `objective` (nullable) receives the number of HAP-served users under
/// average statistics.
///
/// # Safety
/// `s` must be a valid handle; `objective` may be null.
#[no_mangle]
pub unsafe extern "C" fn hapnet_place(s: *mut HapnetScenario, objective: *mut usize) -> HapnetStatus {
    guard(|| {
        let s = as_mut(s, "scenario")?;
        let (placed, trace) = harness::place(&s.config, s.scenario.seed).map_err(lib)?;
        s.scenario = s.scenario.with_haps(placed.haps);
        s.placement_objective = trace.final_objective();
        if !objective.is_null() {
            *objective = s.placement_objective;
        }
        Ok(())
    })
}

/// Solves one short-term instance (fading draw, association, power) on the
/// scenario's current HAP positions.
///
/// # Safety
/// `s` must be a valid handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hapnet_solve(
    s: *const HapnetScenario,
    path: HapnetPath,
    utility: HapnetUtility,
    baseline: HapnetBaseline,
    out: *mut *mut HapnetReport,
) -> HapnetStatus {
    guard(|| {
        let s = as_ref(s, "scenario")?;
        let out = as_mut(out, "out")?;
        let mut config = s.config.clone();
        config.solver.path = match path {
            HapnetPath::FrequencyPartitioning => SolverPath::FrequencyPartitioning,
            HapnetPath::NearOptimal => SolverPath::NearOptimal,
        };
        config.solver.utility = match utility {
            HapnetUtility::Msu => UtilityKind::Msu,
            HapnetUtility::Mmu => UtilityKind::Mmu,
        };
        config.solver.baseline = match baseline {
            HapnetBaseline::None => Baseline::None,
            HapnetBaseline::UniformPower => Baseline::UniformPower,
            HapnetBaseline::RandomAssociation => Baseline::RandomAssociation,
        };
        let run = harness::solve_instance(&config, &s.scenario, s.placement_objective).map_err(lib)?;
        *out = Box::into_raw(Box::new(HapnetReport { run }));
        Ok(())
    })
}

/// Releases a report. Null is ignored.
///
/// # Safety
/// `r` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hapnet_report_free(r: *mut HapnetReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Utility value (sum-rate or minimum rate, bit/s).
///
/// # Safety
/// `r` must be a valid handle; `value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hapnet_report_utility(r: *const HapnetReport, value: *mut f64) -> HapnetStatus {
    guard(|| {
        *as_mut(value, "value")? = as_ref(r, "report")?.run.metrics.utility;
        Ok(())
    })
}

/// Number of users in the report.
///
/// # Safety
/// `r` must be a valid handle; `count` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hapnet_report_user_count(r: *const HapnetReport, count: *mut usize) -> HapnetStatus {
    guard(|| {
        *as_mut(count, "count")? = as_ref(r, "report")?.run.report.user_rates.len();
        Ok(())
    })
}

/// Copies per-user rates (bit/s) into `buf`, which must hold `len` values;
/// `len` must equal the user count.
///
/// # Safety
/// `r` must be a valid handle; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hapnet_report_user_rates(r: *const HapnetReport, buf: *mut f64, len: usize) -> HapnetStatus {
    guard(|| {
        let rates = &as_ref(r, "report")?.run.report.user_rates;
        if len != rates.len() {
            return Err((
                HapnetStatus::InvalidArgument,
                format!("buffer holds {len} values, report has {}", rates.len()),
            ));
        }
        if len > 0 {
            if buf.is_null() {
                return Err(null("buf"));
            }
            ptr::copy_nonoverlapping(rates.as_ptr(), buf, len);
        }
        Ok(())
    })
}

/// Serving tier of `user`: 0 ground, 1 air, 2 space, -1 unserved.
///
/// # Safety
/// `r` must be a valid handle; `tier` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hapnet_report_user_tier(r: *const HapnetReport, user: usize, tier: *mut i32) -> HapnetStatus {
    guard(|| {
        let serving = &as_ref(r, "report")?.run.report.serving;
        let s = serving.get(user).ok_or_else(|| {
            (HapnetStatus::InvalidArgument, format!("user {user} out of range ({})", serving.len()))
        })?;
        *as_mut(tier, "tier")? = match s.map(|l| l.tier) {
            None => -1,
            Some(Tier::Ground) => 0,
            Some(Tier::Air) => 1,
            Some(Tier::Space) => 2,
        };
        Ok(())
    })
}
