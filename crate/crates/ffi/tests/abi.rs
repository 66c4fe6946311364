use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use hapnet_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(hapnet_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn scenario_lifecycle_and_solve() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(hapnet_scenario_new(60, 3, &mut s), HapnetStatus::Ok);
        let (mut u, mut m, mut l, mut w) = (0, 0, 0, 0);
        assert_eq!(hapnet_scenario_counts(s, &mut u, &mut m, &mut l, &mut w), HapnetStatus::Ok);
        assert_eq!((u, l, w), (60, 5, 4));
        assert!(m > 0);

        let mut objective = 0;
        assert_eq!(hapnet_place(s, &mut objective), HapnetStatus::Ok);
        let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
        assert_eq!(hapnet_scenario_hap_position(s, 0, &mut x, &mut y, &mut z), HapnetStatus::Ok);
        assert_eq!(z, 18e3);
        assert_eq!(
            hapnet_scenario_hap_position(s, 99, &mut x, &mut y, &mut z),
            HapnetStatus::InvalidArgument
        );
        assert!(last_error().contains("out of range"));

        let mut r = ptr::null_mut();
        let status = hapnet_solve(s, HapnetPath::FrequencyPartitioning, HapnetUtility::Msu, HapnetBaseline::None, &mut r);
        assert_eq!(status, HapnetStatus::Ok, "{}", last_error());
        let mut n = 0;
        assert_eq!(hapnet_report_user_count(r, &mut n), HapnetStatus::Ok);
        assert_eq!(n, 60);
        let mut rates = vec![0.0; n];
        assert_eq!(hapnet_report_user_rates(r, rates.as_mut_ptr(), n), HapnetStatus::Ok);
        let mut utility = 0.0;
        assert_eq!(hapnet_report_utility(r, &mut utility), HapnetStatus::Ok);
        let sum: f64 = rates.iter().sum();
        assert!((utility - sum).abs() <= 1e-9 * sum);
        assert_eq!(hapnet_report_user_rates(r, rates.as_mut_ptr(), n - 1), HapnetStatus::InvalidArgument);
        let mut tier = 7;
        assert_eq!(hapnet_report_user_tier(r, 0, &mut tier), HapnetStatus::Ok);
        assert!((-1..=2).contains(&tier));

        let mut json = ptr::null_mut();
        assert_eq!(hapnet_scenario_to_json(s, &mut json), HapnetStatus::Ok);
        assert!(CStr::from_ptr(json).to_str().unwrap().contains("\"haps\""));
        hapnet_string_free(json);

        hapnet_report_free(r);
        hapnet_scenario_free(s);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        assert_eq!(hapnet_scenario_new(10, 1, ptr::null_mut()), HapnetStatus::NullPointer);
        assert!(last_error().contains("out"));

        let bad = CString::new("[backhaul]\nbandwidth_mhz = -1.0\n").unwrap();
        let mut s = ptr::null_mut();
        assert_eq!(hapnet_scenario_from_toml(bad.as_ptr(), 1, &mut s), HapnetStatus::Config);
        assert!(s.is_null());

        let junk = CString::new("not = [toml").unwrap();
        assert_eq!(hapnet_scenario_from_toml(junk.as_ptr(), 1, &mut s), HapnetStatus::Parse);

        let mut n = 0;
        assert_eq!(hapnet_report_user_count(ptr::null(), &mut n), HapnetStatus::NullPointer);

        hapnet_scenario_free(ptr::null_mut());
        hapnet_report_free(ptr::null_mut());
        hapnet_string_free(ptr::null_mut());
    }
}

#[test]
fn toml_scenario_matches_default() {
    unsafe {
        let text = CString::new("[counts]\nusers = 25\n").unwrap();
        let mut s = ptr::null_mut();
        assert_eq!(hapnet_scenario_from_toml(text.as_ptr(), 9, &mut s), HapnetStatus::Ok);
        let mut u = 0;
        assert_eq!(hapnet_scenario_counts(s, &mut u, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), HapnetStatus::Ok);
        assert_eq!(u, 25);
        hapnet_scenario_free(s);
        assert_eq!(CStr::from_ptr(hapnet_version()).to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn header_declares_every_export_and_compiles() {
    let header_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/hapnet.h");
    let header = std::fs::read_to_string(&header_path).unwrap();
    let source = include_str!("../src/lib.rs");
    for line in source.lines() {
        if let Some(rest) = line.strip_prefix("pub unsafe extern \"C\" fn ").or(line.strip_prefix("pub extern \"C\" fn ")) {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
        }
    }
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        return;
    };
    if !cc.status.success() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let main = dir.path().join("main.c");
    std::fs::write(
        &main,
        "#include \"hapnet.h\"\nint main(void) { HapnetScenario *s = 0; \
         HapnetStatus st = hapnet_scenario_new(10, 1, &s); hapnet_scenario_free(s); return (int)st; }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header_path.parent().unwrap())
        .arg(&main)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
