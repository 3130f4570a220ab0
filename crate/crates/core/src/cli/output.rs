use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub task: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task: String,
    pub status: TaskStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
}

/// Everything a run produced. Contains no timings, so it is itself
/// reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub tasks: Vec<TaskRecord>,
    /// Sorted by path; the manifest does not list itself.
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?)
    }

    pub fn file(&self, path: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.path == path)
    }
}

/// Output directory that records every file written through it.
pub struct OutputDir {
    root: PathBuf,
    files: BTreeMap<String, FileEntry>,
}

impl OutputDir {
    /// Creates `root`, or reuses it when it is empty or holds nothing but the
    /// files of an earlier manifest, which are removed.
    pub fn prepare(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        let mut owned = Vec::new();
        if root.join(MANIFEST).exists() {
            let old = Manifest::read(root)
                .map_err(|e| Error::Config(format!("{}: unreadable manifest: {e}", root.display())))?;
            owned = old.files.into_iter().map(|f| f.path).collect();
            owned.push(MANIFEST.to_string());
        }
        let present = list_files(root)?;
        if let Some(stray) = present.iter().find(|p| !owned.contains(p)) {
            return Err(Error::Config(format!("output directory {} holds unrelated file {stray}", root.display())));
        }
        for p in present {
            fs::remove_file(root.join(&p))?;
        }
        Ok(Self { root: root.to_path_buf(), files: BTreeMap::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, task: &str, name: &str, bytes: &[u8]) -> Result<()> {
        if self.files.contains_key(name) || name == MANIFEST {
            return Err(Error::InvalidParameter(format!("output file {name} written twice")));
        }
        fs::write(self.root.join(name), bytes)?;
        let sha256 = format!("{:x}", Sha256::digest(bytes));
        self.files.insert(
            name.to_string(),
            FileEntry { path: name.to_string(), task: task.to_string(), bytes: bytes.len() as u64, sha256 },
        );
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, task: &str, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(task, name, text.as_bytes())
    }

    pub fn write_csv(&mut self, task: &str, name: &str, table: Table) -> Result<()> {
        self.write_bytes(task, name, &table.into_bytes()?)
    }

    pub fn finish(self, config: &RunConfig, tasks: Vec<TaskRecord>) -> Result<Manifest> {
        let manifest = Manifest { config: config.clone(), tasks, files: self.files.into_values().collect() };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST), text)?;
        Ok(manifest)
    }
}

/// Relative paths of the regular files under `root`, sorted.
pub fn list_files(root: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).expect("walked from root");
                out.push(rel.to_string_lossy().replace('\\', "/"));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// A CSV table of numbers. Floats use the shortest representation that
/// round-trips, so equal values always print identically.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
    width: usize,
}

#[derive(Clone, Copy, Debug)]
pub enum Cell {
    F(f64),
    I(i64),
    U(usize),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::F)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer, width: header.len() }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        assert_eq!(cells.len(), self.width, "row width");
        let fields: Vec<String> = cells
            .iter()
            .map(|c| match *c {
                Cell::F(v) => format_float(v),
                Cell::I(v) => v.to_string(),
                Cell::U(v) => v.to_string(),
                Cell::Missing => String::new(),
            })
            .collect();
        self.writer.write_record(&fields).expect("in-memory write");
    }

    fn into_bytes(self) -> Result<Vec<u8>> {
        self.writer.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// Shortest round-trip form; `NaN`, `inf` and `-inf` for the specials.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        // Debug switches to exponent form for very small and large magnitudes
        format!("{v:?}")
    }
}

/// File-name friendly rendering of a radius.
pub fn radius_tag(r: f64) -> String {
    format_float(r).replace('.', "p").replace('-', "m")
}
