//! Run configurations, the task pipeline and artifact export.
//!
//! A run executes the configured tasks in dependency order (wave train and
//! spiral solves first, then curves, then the spiral spectra), writes CSV,
//! JSON and SVG files into one output directory and finishes with
//! `manifest.json`, which embeds the resolved config and lists every file
//! with its SHA-256.

pub mod config;
pub mod output;
pub mod svg;
mod tasks;

use std::path::Path;

pub use config::{preset, RunConfig, Task, TaskKind, PRESETS};
pub use output::{format_float, list_files, Manifest, TaskRecord, TaskStatus, MANIFEST};
pub use svg::{export_svg, Dataset, Layer, Style};

use crate::{Error, Result};
use output::OutputDir;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_TASK: i32 = 2;

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub exit_code: i32,
}

/// Reads a run config, or the config embedded in an earlier manifest.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let value = match value {
        serde_json::Value::Object(ref map) if map.contains_key("files") && map.contains_key("config") => map["config"].clone(),
        v => v,
    };
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs every task of `cfg`. Errors are configuration or I/O problems
/// found before any task ran; task failures are reported in the outcome.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut out = OutputDir::prepare(&cfg.output)?;
    let mut ctx = tasks::Context::new(cfg)?;
    let mut records: Vec<TaskRecord> = Vec::new();
    for kind in TaskKind::ALL {
        let Some(task) = cfg.task(kind) else { continue };
        let mut deps = task.requires();
        if task.reads_curves() && cfg.task(TaskKind::Curves).is_some() {
            deps.push(TaskKind::Curves);
        }
        let blocked = deps
            .iter()
            .find(|d| records.iter().any(|r| r.task == d.name() && r.status != TaskStatus::Ok));
        let record = if let Some(dep) = blocked {
            TaskRecord { task: kind.name().into(), status: TaskStatus::Skipped, message: Some(format!("dependency '{}' did not succeed", dep.name())) }
        } else {
            match tasks::execute(task, &mut ctx, &mut out) {
                Ok(()) => TaskRecord { task: kind.name().into(), status: TaskStatus::Ok, message: None },
                Err(e) => {
                    eprintln!("[{}] failed: {e}", kind.name());
                    TaskRecord { task: kind.name().into(), status: TaskStatus::Failed, message: Some(e.to_string()) }
                }
            }
        };
        records.push(record);
    }
    let exit_code = if records.iter().all(|r| r.status == TaskStatus::Ok) { EXIT_OK } else { EXIT_TASK };
    let manifest = out.finish(cfg, records)?;
    Ok(RunOutcome { manifest, exit_code })
}
