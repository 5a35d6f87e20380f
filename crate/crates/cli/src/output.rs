//! Manifests and all-or-nothing artifact writes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, Result};
use crate::experiments::{Artifact, InputFile};
use crate::sha256_hex;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Everything needed to tell whether two runs should agree.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: String,
    pub figure: &'static str,
    pub description: &'static str,
    pub seed: u64,
    pub trials: Option<usize>,
    /// SHA-256 of the canonical config below.
    pub config_sha256: String,
    pub config: Value,
    pub sweep_variable: Option<&'static str>,
    pub summary: BTreeMap<String, f64>,
    pub inputs: Vec<InputFile>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn file_entries(artifacts: &[Artifact]) -> Vec<FileEntry> {
        artifacts
            .iter()
            .map(|a| FileEntry {
                name: a.name.clone(),
                bytes: a.bytes.len(),
                sha256: sha256_hex(&a.bytes),
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut text = serde_json::to_string_pretty(self).map_err(nfsa_core::Error::from)?;
        text.push('\n');
        Ok(text.into_bytes())
    }
}

/// Writes `files` into `dir`. Each file is staged in a temporary file next
/// to its target and renamed into place; if any step fails, the files
/// already moved in and a directory created here are removed again.
pub fn write_all(dir: &Path, files: &[Artifact]) -> Result<()> {
    let created = !dir.exists();
    let err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Write { path, source }
    };
    fs::create_dir_all(dir).map_err(err(dir))?;
    let mut placed: Vec<PathBuf> = Vec::new();
    let result = files.iter().try_for_each(|a| {
        let target = dir.join(&a.name);
        let mut tmp = tempfile::Builder::new()
            .prefix(".nfsa-")
            .tempfile_in(dir)
            .map_err(err(&target))?;
        tmp.write_all(&a.bytes).map_err(err(&target))?;
        tmp.as_file().sync_all().map_err(err(&target))?;
        tmp.persist(&target).map_err(|e| CliError::Write {
            path: target.clone(),
            source: e.error,
        })?;
        placed.push(target);
        Ok(())
    });
    if result.is_err() {
        for p in &placed {
            let _ = fs::remove_file(p);
        }
        if created {
            let _ = fs::remove_dir(dir);
        }
    }
    result
}
