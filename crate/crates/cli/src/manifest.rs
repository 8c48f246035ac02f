//! Run manifests and staged output directories.

use std::fs;
use std::path::{Path, PathBuf};

use flowsynth::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";
const STAGING: &str = ".staging";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed { exit_code: i32, error: String },
}

/// One per output directory, written on success and on failure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    /// Fully resolved configuration.
    pub config: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub duration_secs: f64,
    #[serde(flatten)]
    pub status: RunStatus,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            what: "run manifest",
            msg: e.to_string(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(dir.join(MANIFEST), text)?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Digests an input. When the manifest of the run that wrote it sits next to
/// it, the recorded digest must still match.
pub fn verify_input(role: &str, path: &Path) -> Result<FileRecord> {
    let (sha256, bytes) = sha256_file(path)?;
    let sibling = path.parent().unwrap_or(Path::new(".")).join(MANIFEST);
    if let (Ok(m), Some(name)) = (RunManifest::load(&sibling), path.file_name().and_then(|n| n.to_str())) {
        if let Some(rec) = m.outputs.iter().find(|o| o.path == name) {
            if rec.sha256 != sha256 {
                return Err(Error::Data(format!(
                    "{} does not match the digest recorded in {}",
                    path.display(),
                    sibling.display()
                )));
            }
        }
    }
    Ok(FileRecord {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256,
        bytes,
    })
}

/// Outputs are declared up front, written into a staging directory and moved
/// into place only once the command has succeeded.
pub struct OutputDir {
    dir: PathBuf,
    staging: PathBuf,
    files: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(dir: &Path, outputs: &[(&str, &str)]) -> Result<OutputDir> {
        fs::create_dir_all(dir)?;
        let staging = dir.join(STAGING);
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            staging,
            files: outputs.iter().map(|(r, n)| (r.to_string(), n.to_string())).collect(),
        })
    }

    /// Directory staged outputs are written into.
    pub fn staging(&self) -> &Path {
        &self.staging
    }

    /// Staged path of the declared output `name`.
    pub fn file(&self, name: &str) -> PathBuf {
        debug_assert!(self.files.iter().any(|(_, n)| n == name), "undeclared output {name}");
        self.staging.join(name)
    }

    /// Moves staged files into place and digests them. Declared files that
    /// were never written are skipped.
    pub fn commit(self) -> Result<Vec<FileRecord>> {
        let mut out = Vec::new();
        for (role, name) in &self.files {
            let src = self.staging.join(name);
            if !src.exists() {
                let _ = fs::remove_file(self.dir.join(name));
                continue;
            }
            let dst = self.dir.join(name);
            fs::rename(&src, &dst)?;
            let (sha256, bytes) = sha256_file(&dst)?;
            out.push(FileRecord {
                role: role.clone(),
                path: name.clone(),
                sha256,
                bytes,
            });
        }
        fs::remove_dir_all(&self.staging)?;
        Ok(out)
    }

    /// Drops staged files and stale copies of this command's outputs.
    pub fn abandon(self) {
        let _ = fs::remove_dir_all(&self.staging);
        for (_, name) in &self.files {
            let _ = fs::remove_file(self.dir.join(name));
        }
    }
}
