use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use mvc_ffi::*;

fn last_error() -> String {
    let p = mvc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn exact_p_values() {
    let mut v = f64::NAN;
    unsafe {
        assert_eq!(mvc_exact_p_value([1, 1].as_ptr(), [0.5, 0.5].as_ptr(), 2, &mut v), MvcStatus::Ok);
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(mvc_exact_p_value([2, 0].as_ptr(), [0.5, 0.5].as_ptr(), 2, &mut v), MvcStatus::Ok);
        assert!((v - 0.5).abs() < 1e-12);
        assert_eq!(mvc_exact_p_value([2, 2, 1].as_ptr(), [0.5, 0.5, 0.0].as_ptr(), 3, &mut v), MvcStatus::Ok);
        assert_eq!(v, 0.0);
    }
    assert!(mvc_last_error_message().is_null());
}

#[test]
fn table_handle() {
    let mut table = ptr::null_mut();
    unsafe {
        assert_eq!(mvc_table_new(8, 3, &mut table), MvcStatus::Ok);
        assert_eq!(mvc_table_len(table), 45);
        let mut v = 0.0;
        let p = [0.2, 0.4, 0.4];
        assert_eq!(mvc_table_p_value(table, [1, 6, 1].as_ptr(), p.as_ptr(), 3, &mut v), MvcStatus::Ok);
        let mut w = 0.0;
        assert_eq!(mvc_exact_p_value([1, 6, 1].as_ptr(), p.as_ptr(), 3, &mut w), MvcStatus::Ok);
        assert_eq!(v, w);
        assert_eq!(
            mvc_table_p_value(table, [1, 6].as_ptr(), [0.5, 0.5].as_ptr(), 2, &mut v),
            MvcStatus::DimensionMismatch
        );
        assert!(last_error().contains("dimension"));
        mvc_table_free(table);
        mvc_table_free(ptr::null_mut());
        assert_eq!(mvc_table_len(ptr::null()), 0);
    }
}

#[test]
fn decide_worked_example() {
    let mut cfg = mvc_config_default();
    cfg.alpha = 0.17;
    let (a, b) = ([1u32, 6, 1], [2u32, 1, 5]);
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(mvc_decide(a.as_ptr(), b.as_ptr(), 3, &cfg, &mut d), MvcStatus::Ok);
        assert_eq!(mvc_decision_verdict(d), MvcVerdict::Intersect);
        let mut w = [0.0; 3];
        assert_eq!(mvc_decision_witness(d, w.as_mut_ptr(), 3), 3);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(mvc_decision_witness(d, ptr::null_mut(), 0), 3);
        assert!(mvc_decision_cells_processed(d) > 0);
        assert_eq!(mvc_decision_unresolved_count(d), 0);
        let json = mvc_decision_to_json(d);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        mvc_string_free(json);
        let report = mvc_core::report::RunReport::from_json(&text).unwrap();
        assert_eq!(report.verdict, mvc_core::Verdict::Intersect);
        mvc_decision_free(d);
    }
}

#[test]
fn decide_disjoint_without_witness() {
    let mut cfg = mvc_config_default();
    cfg.alpha = 0.3;
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(mvc_decide([6, 1, 1].as_ptr(), [1, 1, 6].as_ptr(), 3, &cfg, &mut d), MvcStatus::Ok);
        assert_eq!(mvc_decision_verdict(d), MvcVerdict::Disjoint);
        assert_eq!(mvc_decision_witness(d, ptr::null_mut(), 0), 0);
        mvc_decision_free(d);
    }
}

#[test]
fn error_codes() {
    let mut d = ptr::null_mut();
    let mut v = 0.0;
    unsafe {
        assert_eq!(mvc_decide(ptr::null(), [1, 1].as_ptr(), 2, ptr::null(), &mut d), MvcStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(mvc_decide([1, 2].as_ptr(), [2, 2].as_ptr(), 2, ptr::null(), &mut d), MvcStatus::InvalidArgument);
        let mut cfg = mvc_config_default();
        cfg.tau = 0.5;
        assert_eq!(mvc_decide([1, 2].as_ptr(), [2, 1].as_ptr(), 2, &cfg, &mut d), MvcStatus::InvalidTolerance);
        assert!(d.is_null());
        assert_eq!(mvc_exact_p_value([1, 1].as_ptr(), [0.7, 0.7].as_ptr(), 2, &mut v), MvcStatus::InvalidArgument);
        assert_eq!(mvc_chisq_quantile(0, 0.5, &mut v), MvcStatus::InvalidArgument);
        assert_eq!(mvc_chisq_quantile(2, 0.83, ptr::null_mut()), MvcStatus::NullPointer);
        assert_eq!(mvc_chisq_quantile(2, 0.83, &mut v), MvcStatus::Ok);
        assert!((v + 2.0 * 0.17f64.ln()).abs() < 1e-9);
        assert!(mvc_last_error_message().is_null());
        assert_eq!(mvc_decision_verdict(ptr::null()), MvcVerdict::Uncertain);
        assert!(mvc_decision_to_json(ptr::null()).is_null());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(mvc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/mvc.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "typedef struct MvcTable MvcTable;",
        "typedef struct MvcDecision MvcDecision;",
        "MVC_STATUS_OK = 0",
        "MVC_STATUS_PANIC = 7",
        "MVC_VERDICT_UNCERTAIN = 2",
        "mvc_decide(",
        "mvc_decision_witness(",
        "mvc_table_p_value(",
        "mvc_last_error_message(void)",
        "mvc_string_free(",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

/// Compiles and runs a C program against the header and static library
/// when a C compiler and the archive are available.
#[test]
fn c_program_links() {
    let deps = std::env::current_exe().unwrap();
    let profile_dir = deps.parent().and_then(|p| p.parent()).unwrap().to_path_buf();
    let archive = profile_dir.join("libmvc_ffi.a");
    if !archive.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C toolchain or {}", archive.display());
        return;
    }
    let dir = std::env::temp_dir().join(format!("mvc-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "mvc.h"
int main(void) {
    uint32_t a[3] = {1, 6, 1}, b[3] = {2, 1, 5};
    MvcConfig cfg = mvc_config_default();
    cfg.alpha = 0.17;
    MvcDecision *d = NULL;
    if (mvc_decide(a, b, 3, &cfg, &d) != MVC_STATUS_OK) return 10;
    double w[3];
    size_t k = mvc_decision_witness(d, w, 3);
    printf("%d %zu\n", (int)mvc_decision_verdict(d), k);
    mvc_decision_free(d);
    double q;
    if (mvc_chisq_quantile(0, 0.5, &q) != MVC_STATUS_INVALID_ARGUMENT) return 11;
    if (mvc_last_error_message() == NULL) return 12;
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0 3");
    let _ = std::fs::remove_dir_all(&dir);
}
