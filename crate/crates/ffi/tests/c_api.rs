use std::ffi::{CStr, CString};
use std::ptr;

use sfsim::*;

const SCENARIO: &str = r#"
name = "ffi-star"
seed = 3
replicas = 2
duration_s = 5
protocol = "collection"

[topology]
rss_dbm = [
  [0.0, -60.0, -60.0],
  [-60.0, 0.0, -60.0],
  [-60.0, -60.0, 0.0],
]
roles = ["destination", "source", "source"]

[traffic]
mode = "periodic"
period_s = 1

[medium]
model = "ideal"
"#;

fn last_error() -> String {
    let p = sf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn take(s: *mut std::ffi::c_char) -> String {
    let out = unsafe { CStr::from_ptr(s) }.to_string_lossy().into_owned();
    unsafe { sf_string_free(s) };
    out
}

#[test]
fn scenario_round_trip_through_handles() {
    let text = CString::new(SCENARIO).unwrap();
    let mut sc = ptr::null_mut();
    unsafe {
        assert_eq!(sf_scenario_from_toml(text.as_ptr(), &mut sc), SfStatus::Ok);
        assert!(sf_last_error().is_null());
        assert_eq!(sf_scenario_set_replicas(sc, 3), SfStatus::Ok);
        assert_eq!(sf_scenario_validate(sc), SfStatus::Ok);

        let mut rep = ptr::null_mut();
        assert_eq!(sf_run(sc, &mut rep), SfStatus::Ok);
        let mut sum = SfSummary::default();
        assert_eq!(sf_report_summary(rep, &mut sum), SfStatus::Ok);
        assert_eq!(sum.replicas, 3);
        assert!(sum.generated > 0);
        assert_eq!(sum.reliability, 1.0);

        let mut json = ptr::null_mut();
        assert_eq!(sf_report_to_json(rep, &mut json), SfStatus::Ok);
        let json = take(json);
        assert!(json.contains("\"name\": \"ffi-star\""));

        let mut csv = ptr::null_mut();
        assert_eq!(sf_report_to_csv(rep, &mut csv), SfStatus::Ok);
        assert!(take(csv).starts_with("scope,replica,metric,value\n"));

        // Same seed, same bytes.
        let mut again = ptr::null_mut();
        assert_eq!(sf_run(sc, &mut again), SfStatus::Ok);
        let mut json2 = ptr::null_mut();
        sf_report_to_json(again, &mut json2);
        assert_eq!(take(json2), json);

        sf_report_free(again);
        sf_report_free(rep);
        sf_scenario_free(sc);
    }
}

#[test]
fn invalid_scenario_reports_fields() {
    let text = CString::new(SCENARIO.replace("replicas = 2", "replicas = 2\npayload_len = 9999")).unwrap();
    let mut sc = ptr::null_mut();
    unsafe {
        assert_eq!(sf_scenario_from_toml(text.as_ptr(), &mut sc), SfStatus::Ok);
        let mut rep = ptr::null_mut();
        assert_eq!(sf_run(sc, &mut rep), SfStatus::ScenarioInvalid);
        assert!(rep.is_null());
        assert!(last_error().contains("payload_len"));
        sf_scenario_free(sc);
    }
}

#[test]
fn parse_errors_and_nulls() {
    let bad = CString::new("duration_s = ").unwrap();
    let mut sc = ptr::null_mut();
    unsafe {
        assert_eq!(sf_scenario_from_toml(bad.as_ptr(), &mut sc), SfStatus::Parse);
        assert!(sc.is_null());
        assert_eq!(sf_scenario_from_toml(ptr::null(), &mut sc), SfStatus::NullPointer);
        assert_eq!(sf_run(ptr::null(), &mut ptr::null_mut()), SfStatus::NullPointer);
        assert!(last_error().contains("null"));
        sf_scenario_free(ptr::null_mut());
        sf_report_free(ptr::null_mut());
        sf_string_free(ptr::null_mut());

        let missing = CString::new("/nonexistent/scenario.toml").unwrap();
        assert_eq!(sf_scenario_from_file(missing.as_ptr(), &mut sc), SfStatus::Io);
    }
}

#[test]
fn phy_helpers() {
    let phy = CString::new("BLE_2M").unwrap();
    let mut t = 0u64;
    unsafe {
        assert_eq!(sf_airtime_us(phy.as_ptr(), 8, &mut t), SfStatus::Ok);
        assert_eq!(t, 104);
        assert_eq!(sf_slot_duration_us(phy.as_ptr(), 8, &mut t), SfStatus::Ok);
        assert_eq!(t, 104 + 140);
        assert_eq!(sf_airtime_us(phy.as_ptr(), 300, &mut t), SfStatus::PayloadTooLarge);
        let nope = CString::new("BLE_3M").unwrap();
        assert_eq!(sf_airtime_us(nope.as_ptr(), 8, &mut t), SfStatus::UnknownPhy);
    }
}

#[test]
fn pattern_selection() {
    let mut u = 0u32;
    unsafe {
        for (late, want) in [
            (0, 75),
            (12, 75),
            (13, 50),
            (24, 50),
            (25, 25),
            (36, 25),
            (37, 0),
            (48, 0),
        ] {
            assert_eq!(sf_select_pattern(48, late, &mut u), SfStatus::Ok);
            assert_eq!(u, want, "{late}/48");
        }
        assert_eq!(sf_select_pattern(0, 0, &mut u), SfStatus::NoSources);
        assert_eq!(sf_select_pattern(4, 5, &mut u), SfStatus::ConfigInvalid);
    }
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/sfsim.h")).unwrap();
    for sym in [
        "typedef struct SfScenario SfScenario",
        "typedef struct SfReport SfReport",
        "SF_STATUS_SCENARIO_INVALID",
        "sf_scenario_from_toml",
        "sf_run",
        "sf_report_summary",
        "sf_string_free",
        "sf_select_pattern",
    ] {
        assert!(h.contains(sym), "missing {sym}");
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(sf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/sfsim.h");
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .output()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
