//! The `spiralspec` binary: exit codes, filters, determinism and manifests.

use std::path::Path;
use std::process::{Command, Output};

use spiralspec::cli::{list_files, Manifest, MANIFEST};

fn spiralspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spiralspec")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{
  "tasks": [
    {"task": "convdiff", "h": 0.1,
     "spectra": [{"R": 20, "eta": 0.0, "k": 6}, {"R": 20, "eta": 0.5, "k": 6}],
     "resolvent": {"lambda": [-0.15, 0.0], "radii": [10, 20], "etas": [0.0, 0.5]}},
    {"task": "wavetrain", "k": 0.6}
  ]
}"#;

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(spiralspec(&["--help"]).status.code(), Some(0));
    assert_eq!(spiralspec(&["--version"]).status.code(), Some(0));
}

#[test]
fn config_problems_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#"{"tasks": [], "wokers": 2}"#);
    let out = spiralspec(&["--config", &bad, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wokers"));
    assert_eq!(spiralspec(&[]).status.code(), Some(1));
    assert_eq!(spiralspec(&["--preset", "nope"]).status.code(), Some(1));
    assert_eq!(spiralspec(&["--config", "/nonexistent.json"]).status.code(), Some(1));
    assert_eq!(spiralspec(&["--frobnicate"]).status.code(), Some(1));
    let cfg = write_config(dir.path(), SMALL);
    assert_eq!(spiralspec(&["--config", &cfg, "--task", "spiral.eigs"]).status.code(), Some(1));
}

#[test]
fn task_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"tasks": [{"task": "spiral.solve", "radii": [1.0], "h_r": 0.1, "n_theta": 16,
                       "bootstrap": {"h_r": 0.1, "steps": 400, "dt": 0.01}}]}"#,
    );
    let out_dir = dir.path().join("out");
    let out = spiralspec(&["--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let m = Manifest::read(&out_dir).unwrap();
    assert_eq!(m.tasks[0].status, spiralspec::cli::TaskStatus::Failed);
}

#[test]
fn runs_are_byte_identical_and_manifests_complete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = spiralspec(&["--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "7"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let files = list_files(&a).unwrap();
    assert_eq!(files, list_files(&b).unwrap());
    for f in files.iter().filter(|f| *f != MANIFEST) {
        assert!(std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    // the manifests differ only in the recorded output directory
    let manifest = Manifest::read(&a).unwrap();
    assert_eq!(manifest.files, Manifest::read(&b).unwrap().files);
    let mut listed: Vec<String> = manifest.files.iter().map(|f| f.path.clone()).collect();
    listed.push(MANIFEST.into());
    listed.sort();
    assert_eq!(listed, files);
    assert_eq!(manifest.config.seed, 7);

    // the manifest is a config: rerunning from it reproduces the outputs
    let c = dir.path().join("c");
    let o = spiralspec(&["--config", a.join(MANIFEST).to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for f in files.iter().filter(|f| f.ends_with(".csv")) {
        assert!(std::fs::read(a.join(f)).unwrap() == std::fs::read(c.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn task_filter_runs_only_the_named_task() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    let o = spiralspec(&["--config", &cfg, "--out", out.to_str().unwrap(), "--task", "convdiff"]);
    assert_eq!(o.status.code(), Some(0));
    let m = Manifest::read(&out).unwrap();
    assert_eq!(m.tasks.len(), 1);
    assert!(m.files.iter().all(|f| f.task == "convdiff"));
    assert!(m.file("wavetrain.json").is_none());
}

#[test]
fn presets_print() {
    for name in ["repro", "figures"] {
        let o = spiralspec(&["--preset", name, "--print-config"]);
        assert_eq!(o.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!(v["tasks"].as_array().unwrap().len() >= 5);
    }
}
