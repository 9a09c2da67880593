//! Output bookkeeping and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskStatus {
    pub task: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub files: Vec<FileEntry>,
    pub tasks: Vec<TaskStatus>,
}

impl RunManifest {
    pub fn failed(&self) -> bool {
        self.tasks.iter().any(|t| t.status == Status::Failed)
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects emitted files and task outcomes for one run.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<FileEntry>,
    tasks: Vec<TaskStatus>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new(), tasks: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(FileEntry { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let mut buf = Vec::new();
        nltzm::io::write_rows(&mut buf, rows)?;
        self.write(name, &buf)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn ok(&mut self, task: impl Into<String>) {
        self.tasks.push(TaskStatus { task: task.into(), status: Status::Ok, message: None });
    }

    pub fn fail(&mut self, task: impl Into<String>, message: impl std::fmt::Display) {
        let task = task.into();
        log::error!("task {task} failed: {message}");
        self.tasks.push(TaskStatus { task, status: Status::Failed, message: Some(message.to_string()) });
    }

    /// Records `result` as the outcome of `task` and passes the value on.
    pub fn track<T, E: std::fmt::Display>(&mut self, task: impl Into<String>, result: std::result::Result<T, E>) -> Option<T> {
        match result {
            Ok(v) => {
                self.ok(task);
                Some(v)
            }
            Err(e) => {
                self.fail(task, e);
                None
            }
        }
    }

    pub fn finish(self, experiment: &str, config_hash: String, seed: u64, started_unix: u64) -> Result<RunManifest> {
        let manifest = RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: experiment.to_string(),
            config_hash,
            seed,
            started_unix,
            finished_unix: unix_now(),
            files: self.files,
            tasks: self.tasks,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}
