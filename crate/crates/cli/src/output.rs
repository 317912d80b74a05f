//! Output directory handling, CSV/JSON writers and the run manifest.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::CliError;

const LOCK_FILE: &str = ".nlsync.lock";

/// Shortest decimal string that parses back to the same `f64`.
///
/// Plain notation for moderate magnitudes, exponent notation outside
/// `[1e-5, 1e16)` so tiny values do not expand into long runs of zeros.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let a = x.abs();
    if (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Seconds since the epoch; honours `SOURCE_DATE_EPOCH` so repeated runs
/// can produce identical manifests.
pub fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
    {
        return t;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub struct CsvWriter {
    out: BufWriter<File>,
    path: PathBuf,
    rows: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path.display(), e))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
            rows: 0,
        };
        w.line(&header.join(","))?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<(), CliError> {
        self.out
            .write_all(s.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|e| CliError::io(self.path.display(), e))
    }

    pub fn row(&mut self, values: &[f64]) -> Result<(), CliError> {
        let line = values
            .iter()
            .map(|v| fmt_num(*v))
            .collect::<Vec<_>>()
            .join(",");
        self.line(&line)?;
        self.rows += 1;
        Ok(())
    }

    /// Flush and return the number of data rows written.
    pub fn finish(mut self) -> Result<usize, CliError> {
        self.out
            .flush()
            .map_err(|e| CliError::io(self.path.display(), e))?;
        Ok(self.rows)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct OutputFile {
    pub file: String,
    pub rows: usize,
}

/// An output directory held under a lock file for the life of the value.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<OutputFile>,
}

impl OutputDir {
    pub fn open(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root.display(), e))?;
        let lock = root.join(LOCK_FILE);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    CliError::Io(format!(
                        "{} is locked by another run (remove {} if stale)",
                        root.display(),
                        lock.display()
                    ))
                } else {
                    CliError::io(lock.display(), e)
                }
            })?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn record(&mut self, name: &str, rows: usize) {
        self.files.push(OutputFile {
            file: name.to_string(),
            rows,
        });
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name);
        write_json_file(&path, value)?;
        self.record(name, 1);
        Ok(())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.root.join(LOCK_FILE));
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    fs::write(path, to_json(value)).map_err(|e| CliError::io(path.display(), e))
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub time: f64,
    pub step: usize,
    pub field: String,
    pub component: usize,
}

/// Written last; its presence marks a finished run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub started_at_unix: u64,
    pub finished_at_unix: u64,
    pub status: String,
    pub failure: Option<Failure>,
    pub outputs: Vec<OutputFile>,
    pub summary: serde_json::Value,
}
