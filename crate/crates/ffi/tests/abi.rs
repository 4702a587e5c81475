use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use fpr_ffi::*;

fn fixture(name: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = fpr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn network_and_region_round_trip() {
    let mut net = ptr::null_mut();
    unsafe {
        assert_eq!(
            fpr_network_load(
                fixture("lv_feeder.json").as_ptr(),
                fixture("catalog_lv.json").as_ptr(),
                &mut net
            ),
            FprStatus::Ok
        );
        assert!(fpr_last_error().is_null());
        let mut buses = 0;
        assert_eq!(fpr_network_bus_count(net, &mut buses), FprStatus::Ok);
        assert!(buses > 1);

        let mut poly = ptr::null_mut();
        assert_eq!(fpr_for_compute(net, 24, &mut poly), FprStatus::Ok);
        let (mut n, mut area) = (0usize, 0.0);
        assert_eq!(fpr_polygon_info(poly, &mut n, &mut area), FprStatus::Ok);
        assert_eq!(n, 24);
        assert!(area > 0.0);
        let (mut p, mut q) = (vec![0.0; n], vec![0.0; n]);
        assert_eq!(
            fpr_polygon_vertices(poly, p.as_mut_ptr(), q.as_mut_ptr(), n),
            FprStatus::Ok
        );
        assert!(p.iter().chain(&q).all(|v| v.is_finite()));

        let mut json = ptr::null_mut();
        assert_eq!(fpr_polygon_to_json(poly, &mut json), FprStatus::Ok);
        assert!(CStr::from_ptr(json).to_str().unwrap().contains("vertices"));
        fpr_string_free(json);
        fpr_polygon_free(poly);
        fpr_network_free(net);
    }
}

#[test]
fn errors_map_to_codes_and_messages() {
    let mut net = ptr::null_mut();
    unsafe {
        let missing = CString::new("/no/such/grid.json").unwrap();
        assert_eq!(
            fpr_network_load(
                missing.as_ptr(),
                fixture("catalog_lv.json").as_ptr(),
                &mut net
            ),
            FprStatus::Io
        );
        assert!(net.is_null());
        assert!(last_error().contains("/no/such/grid.json"));

        assert_eq!(
            fpr_network_load(ptr::null(), fixture("catalog_lv.json").as_ptr(), &mut net),
            FprStatus::NullArgument
        );
        assert_eq!(
            fpr_network_bus_count(ptr::null(), &mut 0),
            FprStatus::NullArgument
        );
        let bad = [0xffu8, 0];
        assert_eq!(
            fpr_network_load(bad.as_ptr().cast(), bad.as_ptr().cast(), &mut net),
            FprStatus::InvalidUtf8
        );

        // the MV grid against the LV catalog references unknown types
        assert_eq!(
            fpr_network_load(
                fixture("mv_grid.json").as_ptr(),
                fixture("catalog_lv.json").as_ptr(),
                &mut net
            ),
            FprStatus::Catalog
        );

        fpr_network_free(ptr::null_mut());
        fpr_polygon_free(ptr::null_mut());
        fpr_string_free(ptr::null_mut());
    }
}

#[test]
fn lp_text_and_study_entry_points() {
    let lp = CString::new("Minimize\n obj: + 1 x + 2 y\nSubject To\n c1: + 1 x + 1 y >= 3\nBounds\n 0 <= x <= 2\n y >= 0\nEnd\n").unwrap();
    let (mut status, mut obj) = (FprLpStatus::Failed, 0.0);
    unsafe {
        assert_eq!(
            fpr_lp_solve(lp.as_ptr(), &mut status, &mut obj),
            FprStatus::Ok
        );
    }
    assert_eq!(status, FprLpStatus::Optimal);
    assert!((obj - 4.0).abs() < 1e-9);

    let mut json = ptr::null_mut();
    unsafe {
        assert_eq!(
            fpr_cep_study(fixture("study.json").as_ptr(), &mut json),
            FprStatus::Ok
        );
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        fpr_string_free(json);
        assert!(text.contains("objective_delta"));
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(fpr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn static_lib() -> Option<PathBuf> {
    // tests/../../../target/<profile>/deps/<test-binary>
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libfpr_ffi.a");
    lib.is_file().then_some(lib)
}

#[test]
fn header_compiles_and_links_from_c() {
    let header_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(header_dir.join("fpr_ffi.h")).unwrap();
    for f in [
        "fpr_network_load",
        "fpr_for_compute",
        "fpr_lp_solve",
        "fpr_cep_study",
        "fpr_last_error",
        "fpr_string_free",
    ] {
        assert!(header.contains(f), "{f} missing from header");
    }
    let (Some(lib), Ok(_)) = (
        static_lib(),
        std::process::Command::new("cc").arg("--version").output(),
    ) else {
        eprintln!("no C compiler or static library, skipping link check");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include "fpr_ffi.h"
#include <stdio.h>
int main(int argc, char **argv) {
    FprNetwork *net = NULL;
    if (fpr_network_load(argv[1], argv[2], &net) != FPR_STATUS_OK) { puts(fpr_last_error()); return 1; }
    FprPolygon *poly = NULL;
    if (fpr_for_compute(net, 12, &poly) != FPR_STATUS_OK) return 2;
    size_t n = 0; double area = 0;
    fpr_polygon_info(poly, &n, &area);
    printf("%zu %.6f\n", n, area);
    fpr_polygon_free(poly);
    fpr_network_free(net);
    return fpr_network_load("missing.json", argv[2], &net) == FPR_STATUS_IO ? 0 : 3;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let cc = std::process::Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        cc.status.success(),
        "{}",
        String::from_utf8_lossy(&cc.stderr)
    );
    let run = std::process::Command::new(&exe)
        .arg(fixture("two_bus.json").to_str().unwrap())
        .arg(fixture("catalog_lv.json").to_str().unwrap())
        .output()
        .unwrap();
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stdout)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("12 "));
}
