//! Compiles a small C program against the generated header and the shared
//! library, then runs it.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "spiralspec.h"

int main(void) {
    double re[4], im[4];
    size_t n = 0;
    ss_status st = ss_convdiff_eigenvalues(1.0, 20.0, 0.05, 0.5, 4, 0.0, 0.0, 1e-10, re, im, 4, &n);
    if (st != SS_STATUS_OK || n != 4) return 1;
    ss_model *model = NULL;
    if (ss_model_barkley(0.7, 0.01, -1.0, 0.2, &model) != SS_STATUS_INVALID_ARGUMENT) return 2;
    char msg[256];
    if (ss_last_error(msg, sizeof msg) <= 1) return 3;
    printf("%zu %.6f\n", n, re[0]);
    return 0;
}
"#;

fn library_dir() -> Option<PathBuf> {
    // the test binary lives in target/<profile>/deps
    let exe = std::env::current_exe().ok()?;
    let dir = exe.parent()?.parent()?.to_path_buf();
    dir.join("libspiralspec_ffi.so").exists().then_some(dir)
}

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = library_dir() else {
        panic!("shared library not found next to the test binary");
    };
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler on PATH; nothing to check");
        return;
    };
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("client.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = tmp.path().join("client");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg("-L")
        .arg(&lib)
        .arg("-lspiralspec_ffi")
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).env("LD_LIBRARY_PATH", &lib).output().unwrap();
    assert!(out.status.success(), "client exited with {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("4 "), "{text}");
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
