//! C ABI over `sfsim-core`.
//!
//! Every fallible call returns an [`SfStatus`]; on failure a message is kept
//! per thread and can be read with [`sf_last_error`]. Scenario and report
//! handles are opaque and must be released with their `_free` function.
//! Strings returned through out-parameters are owned by the caller and
//! released with [`sf_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use sfsim_core::harness::{Scenario, SimReport};
use sfsim_core::phy::{airtime, slot_duration, PhyId, PhyMode, SlotTiming};
use sfsim_core::protocols::{select_pattern_name, LateRatioReport};
use sfsim_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    ScenarioInvalid = 4,
    ConfigInvalid = 5,
    PayloadTooLarge = 6,
    HookViolation = 7,
    PatternInvalid = 8,
    NoSources = 9,
    UnknownPhy = 10,
    Io = 11,
    Serialize = 12,
    Panic = 13,
}

/// Parsed scenario, possibly with seed or replica overrides.
pub struct SfScenario {
    inner: Scenario,
}

/// Result of running a scenario.
pub struct SfReport {
    inner: SimReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut bytes = msg.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> SfStatus {
    match e {
        Error::PayloadTooLarge { .. } => SfStatus::PayloadTooLarge,
        Error::EmptySequence | Error::ConfigInvalid(_) => SfStatus::ConfigInvalid,
        Error::HookViolation(_) => SfStatus::HookViolation,
        Error::PatternInvalid(_) => SfStatus::PatternInvalid,
        Error::NoSources => SfStatus::NoSources,
        Error::ScenarioInvalid(_) => SfStatus::ScenarioInvalid,
        Error::Parse(_) => SfStatus::Parse,
        Error::Io(_) => SfStatus::Io,
        Error::Json(_) | Error::Csv(_) => SfStatus::Serialize,
    }
}

struct Failure(SfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Run `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_error();
            SfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SfStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SfStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn phy_arg(name: &str) -> Result<PhyMode, Failure> {
    name.parse::<PhyId>()
        .map(PhyMode::builtin)
        .map_err(|_| Failure(SfStatus::UnknownPhy, format!("unknown PHY {name:?}")))
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(SfStatus::Serialize, "output contains a nul byte".into()))
}

/// Message of the last failed call on this thread, or null after a
/// successful one. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a scenario from TOML text.
#[no_mangle]
pub unsafe extern "C" fn sf_scenario_from_toml(text: *const c_char, out: *mut *mut SfScenario) -> SfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let sc = Scenario::from_toml_str(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(SfScenario { inner: sc }));
        Ok(())
    })
}

/// Parse a scenario from a TOML file.
#[no_mangle]
pub unsafe extern "C" fn sf_scenario_from_file(path: *const c_char, out: *mut *mut SfScenario) -> SfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let sc = Scenario::from_path(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(SfScenario { inner: sc }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_scenario_set_seed(scenario: *mut SfScenario, seed: u64) -> SfStatus {
    guard(|| {
        out_arg(scenario, "scenario")?.inner.seed = seed;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_scenario_set_replicas(scenario: *mut SfScenario, replicas: u32) -> SfStatus {
    guard(|| {
        out_arg(scenario, "scenario")?.inner.replicas = replicas;
        Ok(())
    })
}

/// Check a scenario without running it.
#[no_mangle]
pub unsafe extern "C" fn sf_scenario_validate(scenario: *const SfScenario) -> SfStatus {
    guard(|| {
        ref_arg(scenario, "scenario")?.inner.prepare()?;
        Ok(())
    })
}

/// Release a scenario. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sf_scenario_free(scenario: *mut SfScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Run every replica of `scenario`.
#[no_mangle]
pub unsafe extern "C" fn sf_run(scenario: *const SfScenario, out: *mut *mut SfReport) -> SfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let report = sfsim_core::run_scenario(&ref_arg(scenario, "scenario")?.inner)?;
        *out = Box::into_raw(Box::new(SfReport { inner: report }));
        Ok(())
    })
}

/// Release a report. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sf_report_free(report: *mut SfReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Pooled metrics of a report.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SfSummary {
    pub replicas: u32,
    pub generated: u64,
    pub delivered: u64,
    pub reliability: f64,
    pub latency_mean_us: f64,
    pub latency_median_us: u64,
    pub latency_p95_us: u64,
    pub radio_on_us: u64,
    pub radio_on_us_per_node: f64,
    pub energy_mj: f64,
}

#[no_mangle]
pub unsafe extern "C" fn sf_report_summary(report: *const SfReport, out: *mut SfSummary) -> SfStatus {
    guard(|| {
        let a = &ref_arg(report, "report")?.inner.aggregate;
        *out_arg(out, "out")? = SfSummary {
            replicas: a.replicas,
            generated: a.generated,
            delivered: a.delivered,
            reliability: a.reliability,
            latency_mean_us: a.latency.mean_us,
            latency_median_us: a.latency.median_us,
            latency_p95_us: a.latency.p95_us,
            radio_on_us: a.radio_on_us,
            radio_on_us_per_node: a.radio_on_us_per_node,
            energy_mj: a.energy_mj,
        };
        Ok(())
    })
}

/// Full report as JSON. Free the string with [`sf_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sf_report_to_json(report: *const SfReport, out: *mut *mut c_char) -> SfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        *out = to_c_string(ref_arg(report, "report")?.inner.to_json()?)?;
        Ok(())
    })
}

/// Report as `scope,replica,metric,value` CSV. Free with [`sf_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sf_report_to_csv(report: *const SfReport, out: *mut *mut c_char) -> SfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        *out = to_c_string(ref_arg(report, "report")?.inner.to_csv()?)?;
        Ok(())
    })
}

/// Release a string returned by this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// On-air time of a frame in microseconds. `phy` is a name such as `BLE_2M`.
#[no_mangle]
pub unsafe extern "C" fn sf_airtime_us(phy: *const c_char, payload_len: usize, out: *mut u64) -> SfStatus {
    guard(|| {
        let mode = phy_arg(str_arg(phy, "phy")?)?;
        *out_arg(out, "out")? = airtime(&mode, payload_len)?.as_u64();
        Ok(())
    })
}

/// Slot length in microseconds with default slot timing.
#[no_mangle]
pub unsafe extern "C" fn sf_slot_duration_us(phy: *const c_char, payload_len: usize, out: *mut u64) -> SfStatus {
    guard(|| {
        let mode = phy_arg(str_arg(phy, "phy")?)?;
        *out_arg(out, "out")? = slot_duration(&mode, payload_len, &SlotTiming::default())?.as_u64();
        Ok(())
    })
}

/// Fast-PHY utilization in percent chosen for `late` of `expected` sources.
#[no_mangle]
pub unsafe extern "C" fn sf_select_pattern(expected: u32, late: u32, fast_utilization: *mut u32) -> SfStatus {
    guard(|| {
        let out = out_arg(fast_utilization, "fast_utilization")?;
        if late > expected {
            return Err(Failure(
                SfStatus::ConfigInvalid,
                format!("{late} late sources out of {expected}"),
            ));
        }
        let name = select_pattern_name(&LateRatioReport::new(expected as usize, late as usize))?;
        *out = name.fast_utilization() as u32;
        Ok(())
    })
}
