use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use byzcode_ffi::*;

const INDEPENDENT_BITS: &str = r#"{"schema":1,"alphabet_sizes":[2,2,2],"probs":[0.125,0.125,0.125,0.125,0.125,0.125,0.125,0.125]}"#;

fn load(json: &str) -> *mut BzPmf {
    let c = CString::new(json).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { bz_pmf_from_json(c.as_ptr(), &mut p) },
        BzStatus::Ok
    );
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    let e = bz_last_error();
    assert!(!e.is_null());
    unsafe { CStr::from_ptr(e) }.to_string_lossy().into_owned()
}

#[test]
fn entropy_and_information_of_xor_triple() {
    // X3 = X1 xor X2 with X1, X2 uniform: any pair determines the third.
    let sizes = [2usize, 2, 2];
    let probs = [0.25, 0.0, 0.0, 0.25, 0.0, 0.25, 0.25, 0.0];
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(
            bz_pmf_new(sizes.as_ptr(), 3, probs.as_ptr(), 8, &mut p),
            BzStatus::Ok
        );
        assert_eq!(bz_pmf_num_sensors(p), 3);
        let mut h = 0.0;
        assert_eq!(bz_entropy(p, 0b111, &mut h), BzStatus::Ok);
        assert!((h - 2.0).abs() < 1e-12);
        assert_eq!(bz_entropy(p, 0b001, &mut h), BzStatus::Ok);
        assert!((h - 1.0).abs() < 1e-12);
        let mut i = 0.0;
        assert_eq!(
            bz_conditional_mutual_information(p, 0b001, 0b010, 0b000, &mut i),
            BzStatus::Ok
        );
        assert!(i.abs() < 1e-12);
        assert_eq!(
            bz_conditional_mutual_information(p, 0b001, 0b010, 0b100, &mut i),
            BzStatus::Ok
        );
        assert!((i - 1.0).abs() < 1e-12);
        bz_pmf_free(p);
    }
}

#[test]
fn rate_limits_for_independent_bits() {
    let p = load(INDEPENDENT_BITS);
    unsafe {
        let mut v = 0.0;
        assert_eq!(bz_sum_rate_star(p, 1, &mut v), BzStatus::Ok);
        assert!((v - 3.0).abs() < 1e-9);
        assert_eq!(bz_closed_form_t1(p, &mut v), BzStatus::Ok);
        assert!((v - 3.0).abs() < 1e-9);
        assert_eq!(bz_min_sum_rate(p, 2, &mut v), BzStatus::Ok);
        assert!((v - 3.0).abs() < 1e-7);

        let mut ok = false;
        let full = [1.0, 1.0, 1.0];
        assert_eq!(
            bz_region_check(p, full.as_ptr(), 3, 1, BzRegionMode::Rfr, &mut ok),
            BzStatus::Ok
        );
        assert!(ok);
        let short = [0.9, 1.0, 1.0];
        assert_eq!(
            bz_region_check(p, short.as_ptr(), 3, 1, BzRegionMode::Dfr, &mut ok),
            BzStatus::Ok
        );
        assert!(!ok);
        bz_pmf_free(p);
    }
}

#[test]
fn honest_session_reports_json() {
    let p = load(INDEPENDENT_BITS);
    let params = BzSimParams {
        k: 200,
        rounds: 1,
        epsilon: 0.05,
        functions: 8,
        seed: 11,
        t: 0,
        typicality_eps: 0.0,
    };
    unsafe {
        let mut out = ptr::null_mut();
        let st = bz_simulate_session(p, &params, 0, BzStrategy::Honest, ptr::null(), &mut out);
        assert_eq!(st, BzStatus::Ok);
        let text = CStr::from_ptr(out).to_str().unwrap().to_owned();
        bz_string_free(out);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["k"], 200);
        assert_eq!(v["strategy"], "honest");
        assert!(v["total_bits"].as_u64().unwrap() > 0);
        assert!(v["session_error"].is_null());
        bz_pmf_free(p);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut v = 0.0;
        assert_eq!(bz_entropy(ptr::null(), 1, &mut v), BzStatus::NullPointer);
        assert!(last_error().contains("null"));

        let bad = CString::new("{not json").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(
            bz_pmf_from_json(bad.as_ptr(), &mut p),
            BzStatus::InvalidJson
        );
        assert!(p.is_null());

        let sizes = [2usize, 2];
        let probs = [0.5, 0.5, 0.5, 0.5];
        assert_eq!(
            bz_pmf_new(sizes.as_ptr(), 2, probs.as_ptr(), 4, &mut p),
            BzStatus::InvalidArgument
        );
        assert!(!last_error().is_empty());

        let p = load(INDEPENDENT_BITS);
        assert_eq!(bz_entropy(p, 0b1000, &mut v), BzStatus::InvalidArgument);
        assert_eq!(bz_sum_rate_star(p, 3, &mut v), BzStatus::InvalidArgument);
        assert_eq!(bz_entropy(p, 0b1, &mut v), BzStatus::Ok);
        assert!(bz_last_error().is_null());
        bz_pmf_free(p);
        bz_pmf_free(ptr::null_mut());
        bz_string_free(ptr::null_mut());
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/byzcode.h")
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

#[test]
fn header_compiles_as_c_and_cpp() {
    if !have_cc() {
        eprintln!("cc not found, skipping");
        return;
    }
    for lang in ["c", "c++"] {
        let out = Command::new("cc")
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(header())
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn c_program_links_static_library() {
    if !have_cc() {
        eprintln!("cc not found, skipping");
        return;
    }
    let deps = std::env::current_exe().unwrap();
    let lib = deps
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .join("libbyzcode_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "byzcode.h"
int main(void) {
    size_t sizes[2] = {2, 2};
    double probs[4] = {0.5, 0.0, 0.0, 0.5};
    BzPmf *p = NULL;
    if (bz_pmf_new(sizes, 2, probs, 4, &p) != BZ_STATUS_OK) return 2;
    double h = 0.0;
    if (bz_entropy(p, 3u, &h) != BZ_STATUS_OK) return 3;
    if (bz_entropy(p, 4u, &h) != BZ_STATUS_INVALID_ARGUMENT) return 4;
    if (bz_last_error() == NULL) return 5;
    bz_entropy(p, 3u, &h);
    printf("%.6f\n", h);
    bz_pmf_free(p);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "1.000000");
}
