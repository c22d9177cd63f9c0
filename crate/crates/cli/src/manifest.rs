//! Run manifests: what went in, what came out, and with which settings.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    /// Seconds since the epoch; the only field that differs between identical runs.
    pub created_unix: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn entry_for_bytes(path: &Path, bytes: &[u8]) -> FileEntry {
    FileEntry { path: path.display().to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 }
}

pub fn entry_for_file(path: &Path) -> Result<FileEntry, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(entry_for_bytes(path, &bytes))
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value, inputs: Vec<FileEntry>, outputs: Vec<FileEntry>) -> Self {
        let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        RunManifest {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix,
            config,
            inputs,
            outputs,
        }
    }
}

/// `<primary>.manifest.json` next to the primary output.
pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    primary.with_file_name(name)
}
