//! Output directory with atomic writes and a checksummed manifest.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: Config,
    pub duration_secs: f64,
    pub files: Vec<FileRecord>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileRecord>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self {
            root,
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        write_atomic(&self.root.join(name), bytes)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileRecord {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_with<F>(&mut self, name: &str, fill: F) -> CliResult<()>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|e| CliError::io(self.root.join(name), e))?;
        self.write_bytes(name, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut buf =
            serde_json::to_vec_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
        buf.push(b'\n');
        self.write_bytes(name, &buf)
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// Writes the manifest last, so its presence marks a completed run.
    pub fn finish(
        self,
        command: &str,
        seed: u64,
        config: Config,
        took: Duration,
    ) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            tool: "mfbm-ruin".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
            duration_secs: took.as_secs_f64(),
            files: self.files,
        };
        let mut buf =
            serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Numerical(e.to_string()))?;
        buf.push(b'\n');
        write_atomic(&self.root.join(MANIFEST_NAME), &buf)?;
        Ok(manifest)
    }
}
