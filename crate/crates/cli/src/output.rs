//! Output directories are assembled in a hidden sibling and renamed into
//! place, so readers never see a half-written run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::TempDir;

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: Option<String>,
    pub config_overrides: serde_json::Value,
    pub seed: Option<u64>,
    pub output_dir: String,
    pub tool_version: String,
}

pub struct Staging {
    dir: TempDir,
    target: PathBuf,
}

impl Staging {
    /// Creates the staging directory and writes the manifest into it first.
    pub fn create(target: &Path, manifest: &RunManifest) -> Result<Self, CliError> {
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| CliError::io(&parent, e))?;
        let name = target
            .file_name()
            .ok_or_else(|| CliError::Usage(format!("invalid output directory {}", target.display())))?;
        let dir = tempfile::Builder::new()
            .prefix(&format!(".{}.", name.to_string_lossy()))
            .tempdir_in(&parent)
            .map_err(|e| CliError::io(&parent, e))?;
        let staging = Self {
            dir,
            target: target.to_path_buf(),
        };
        staging.write_json(MANIFEST, manifest)?;
        Ok(staging)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.dir.path().join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(name, e))?;
        text.push('\n');
        self.write(name, text)
    }

    /// Moves the staged files to the target. A previous run's output is
    /// replaced; any other existing directory is left alone.
    pub fn commit(self) -> Result<PathBuf, CliError> {
        let target = self.target;
        if target.exists() {
            if !target.join(MANIFEST).is_file() {
                return Err(CliError::io(
                    &target,
                    std::io::Error::new(
                        std::io::ErrorKind::AlreadyExists,
                        "exists and is not an mpcom output directory",
                    ),
                ));
            }
            fs::remove_dir_all(&target).map_err(|e| CliError::io(&target, e))?;
        }
        let staged = self.dir.keep();
        fs::rename(&staged, &target).map_err(|e| CliError::io(&target, e))?;
        Ok(target)
    }
}
