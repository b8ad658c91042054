//! `manifest.json`: what a command read, what it wrote, and the settings
//! it ran with.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::formats::write_file;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&data)), bytes: data.len() as u64 })
}

/// One digest over every file in a directory, by sorted name.
pub fn digest_dir(dir: &Path) -> Result<FileDigest> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    names.retain(|p| p.is_file());
    names.sort();
    let mut h = Sha256::new();
    let mut bytes = 0;
    for p in &names {
        let d = digest_file(p)?;
        h.update(p.file_name().map(|n| n.as_encoded_bytes()).unwrap_or_default());
        h.update(d.sha256.as_bytes());
        bytes += d.bytes;
    }
    Ok(FileDigest { path: dir.display().to_string(), sha256: hex::encode(h.finalize()), bytes })
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl Manifest {
    pub fn new(command: &str, config: &impl Serialize, seed: u64, threads: usize) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            threads,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let d = if path.is_dir() { digest_dir(path)? } else { digest_file(path)? };
        self.inputs.push(d);
        Ok(())
    }

    pub fn outputs(&mut self, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            let d = if p.is_dir() { digest_dir(p)? } else { digest_file(p)? };
            self.outputs.push(d);
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        text.push(b'\n');
        write_file(path, &text)
    }
}
