use std::ffi::{CStr, CString};
use std::ptr;

use spiralspec_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    unsafe { ss_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn convdiff_at_half_drift_matches_dirichlet_modes() {
    let (mut re, mut im) = (vec![0.0; 8], vec![0.0; 8]);
    let mut n = 0usize;
    let st = unsafe { ss_convdiff_eigenvalues(1.0, 20.0, 0.05, 0.5, 4, 0.0, 0.0, 1e-10, re.as_mut_ptr(), im.as_mut_ptr(), 8, &mut n) };
    assert_eq!(st, SsStatus::Ok, "{}", last_error());
    assert_eq!(n, 4);
    let mut got: Vec<f64> = re[..n].to_vec();
    got.sort_by(|a, b| b.total_cmp(a));
    for (j, z) in got.iter().enumerate() {
        let m = (j + 1) as f64;
        // second-order differences on the length-20 interval
        let exact = -0.25 - (m * std::f64::consts::PI / 20.0).powi(2);
        assert!((z - exact).abs() < 1e-3, "{z} vs {exact}");
        assert!(im[j].abs() < 1e-8);
    }
    assert!(last_error().is_empty());
}

#[test]
fn short_buffers_report_the_needed_count() {
    let (mut re, mut im) = ([0.0; 2], [0.0; 2]);
    let mut n = 0usize;
    let st = unsafe { ss_convdiff_eigenvalues(1.0, 10.0, 0.1, 0.5, 5, 0.0, 0.0, 1e-10, re.as_mut_ptr(), im.as_mut_ptr(), 2, &mut n) };
    assert_eq!(st, SsStatus::BufferTooSmall);
    assert_eq!(n, 5);
}

#[test]
fn bad_arguments_map_to_codes_and_messages() {
    let mut sigma = 0.0;
    let st = unsafe { ss_convdiff_sigma_min(1.0, 10.0, -0.1, 0.0, 0.0, 0.0, &mut sigma) };
    assert_eq!(st, SsStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    let st = unsafe { ss_convdiff_sigma_min(1.0, 10.0, 0.1, 0.0, -0.15, 0.0, ptr::null_mut()) };
    assert_eq!(st, SsStatus::NullPointer);
    let st = unsafe { ss_spiral_info(ptr::null(), &mut sigma, ptr::null_mut()) };
    assert_eq!(st, SsStatus::NullPointer);
    let mut model = ptr::null_mut();
    let st = unsafe { ss_model_barkley(0.7, 0.01, -1.0, 0.2, &mut model) };
    assert_eq!(st, SsStatus::InvalidArgument);
    assert!(model.is_null());
}

#[test]
fn small_disks_report_decay() {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { ss_model_barkley(0.7, 0.01, 0.02, 0.2, &mut model) }, SsStatus::Ok);
    let mut spiral = ptr::null_mut();
    let st = unsafe { ss_spiral_solve(model, 1.0, 0.1, 16, 0.1, 400, 0.01, &mut spiral) };
    assert_eq!(st, SsStatus::Decayed, "{}", last_error());
    assert!(spiral.is_null());
    unsafe { ss_model_free(model) };
}

#[test]
fn wave_train_frequency_is_exposed() {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { ss_model_barkley(0.7, 0.01, 0.02, 0.2, &mut model) }, SsStatus::Ok);
    let mut wt = ptr::null_mut();
    assert_eq!(unsafe { ss_wavetrain_solve(model, 0.6, &mut wt) }, SsStatus::Ok, "{}", last_error());
    let mut omega = 0.0;
    assert_eq!(unsafe { ss_wavetrain_omega(wt, &mut omega) }, SsStatus::Ok);
    assert!(omega > 1.0 && omega < 3.0, "{omega}");
    unsafe {
        ss_wavetrain_free(wt);
        ss_model_free(model);
    }
}

#[test]
fn pipeline_runs_and_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let good = CString::new(r#"{"tasks": [{"task": "convdiff", "h": 0.1, "spectra": [{"R": 10, "eta": 0.5, "k": 3}]}]}"#).unwrap();
    assert_eq!(unsafe { ss_run_config(good.as_ptr(), out.as_ptr()) }, SsStatus::Ok, "{}", last_error());
    assert!(dir.path().join("manifest.json").exists());
    let bad = CString::new(r#"{"tasks": [], "colour": 1}"#).unwrap();
    assert_eq!(unsafe { ss_run_config(bad.as_ptr(), out.as_ptr()) }, SsStatus::Config);
    assert!(last_error().contains("colour"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/spiralspec.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.trim().strip_prefix("pub unsafe extern \"C\" fn "))
        .map(|l| l.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 12);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("SS_STATUS_DECAYED = 5"));
    assert!(header.contains("typedef struct ss_spiral ss_spiral;"));
}
