//! Output directory with a hashed manifest.
//!
//! Nothing run-dependent beyond config and seed goes in: no timestamps, no
//! worker counts, so reruns are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::exit::CliError;

pub const MANIFEST_FORMAT: &str = "filterlab-manifest/1";
pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridEntry {
    pub horizon: f64,
    pub dt: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub format: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub scenario: String,
    pub config_sha256: String,
    pub seed: u64,
    pub seed_from_flag: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridEntry>,
    pub files: Vec<FileEntry>,
}

pub struct OutputDir {
    root: PathBuf,
    manifest: Manifest,
}

impl OutputDir {
    pub fn create(root: &Path, manifest: Manifest) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.manifest.files.push(FileEntry {
            name: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        let path = self.root.join(MANIFEST_NAME);
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(self.root)
    }
}
