//! Per-command run manifests: config hash, seed, version and the hashes of
//! every file read or written.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub workers: Option<usize>,
    pub config_sha256: String,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    #[serde(skip)]
    out_dir: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn entry(out_dir: &Path, path: &Path) -> Result<FileEntry> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    let shown = path.strip_prefix(out_dir).unwrap_or(path);
    Ok(FileEntry {
        path: shown.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

impl Manifest {
    pub fn new(command: &str, seed: u64, workers: Option<usize>, config_text: &str, out_dir: &Path) -> Self {
        Manifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            workers,
            config_sha256: sha256_hex(config_text.as_bytes()),
            inputs: Vec::new(),
            outputs: Vec::new(),
            out_dir: out_dir.to_path_buf(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let e = entry(&self.out_dir, path)?;
        self.inputs.push(e);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        let e = entry(&self.out_dir, path)?;
        self.outputs.push(e);
        Ok(())
    }

    /// Writes `<command>.manifest.json` into the output directory.
    pub fn write(&self) -> Result<PathBuf> {
        let path = self.out_dir.join(format!("{}.manifest.json", self.command));
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
