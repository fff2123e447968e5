use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::config::RunConfig;
use super::stages::write_manifest_json;

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PriorRecord {
    pub stage: String,
    pub spec: String,
    pub g_prior: String,
    pub hyper_a: Option<f64>,
    pub model_prior: String,
}

/// Record of one run directory.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub started: String,
    /// `ok`, or `FAILED` when a stage errored.
    pub status: String,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    /// Run directory the stage read its upstream artifacts from.
    pub upstream: Option<PathBuf>,
    pub config: RunConfig,
    pub seeds: BTreeMap<String, u64>,
    pub priors: Vec<PriorRecord>,
    pub stages: Vec<StageRecord>,
    /// SHA-256 of every output file, keyed by file name.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, upstream: Option<PathBuf>) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            started: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            status: "ok".into(),
            failed_stage: None,
            error: None,
            upstream,
            config: config.clone(),
            seeds: BTreeMap::new(),
            priors: Vec::new(),
            stages: Vec::new(),
            files: BTreeMap::new(),
        }
    }

    pub fn add_files(&mut self, dir: &Path, names: &[String]) -> Result<()> {
        for name in names {
            let path = dir.join(name);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            self.files.insert(name.clone(), hex::encode(Sha256::digest(&bytes)));
        }
        Ok(())
    }

    pub fn fail(&mut self, stage: &str, err: &Error) {
        self.status = "FAILED".into();
        self.failed_stage = Some(stage.into());
        self.error = Some(err.to_string());
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_manifest_json(&dir.join(MANIFEST_FILE), self)
    }
}

/// Creates a fresh `run-<UTC timestamp>` directory under `parent`, adding a
/// numeric suffix rather than reusing an existing one.
pub fn create_run_dir(parent: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let stamp = chrono::Utc::now().format("run-%Y%m%dT%H%M%SZ").to_string();
    for n in 0.. {
        let name = if n == 0 { stamp.clone() } else { format!("{stamp}-{n}") };
        let dir = parent.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&dir, e)),
        }
    }
    unreachable!("unbounded suffix search")
}
