//! `run.json`: the resolved configuration plus content hashes of every input
//! and output file. Paths are stored relative to their root so manifests of
//! identical runs in different directories are identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{file_error, Result};

pub const MANIFEST: &str = "run.json";

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    pub options: serde_json::Value,
    pub config: RunConfig,
    /// role → relative path → sha256
    pub inputs: BTreeMap<String, BTreeMap<String, String>>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| file_error(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Every regular file under `root`, relative and sorted.
pub fn files_under(root: &Path) -> Result<Vec<PathBuf>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        for entry in std::fs::read_dir(dir).map_err(|e| file_error(dir, e))? {
            let path = entry.map_err(|e| file_error(dir, e))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                out.push(path.strip_prefix(root).expect("under root").to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.sort();
    Ok(out)
}

fn key(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, options: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            options,
            config: config.clone(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Hashes one input file, keyed by its name under `role`.
    pub fn input_file(&mut self, role: &str, path: &Path) -> Result<()> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let hash = sha256_file(path)?;
        self.inputs.entry(role.to_string()).or_default().insert(name, hash);
        Ok(())
    }

    /// Hashes every file of an input directory (a dataset), except manifests.
    pub fn input_dir(&mut self, role: &str, dir: &Path) -> Result<()> {
        let entry = self.inputs.entry(role.to_string()).or_default();
        for rel in files_under(dir)? {
            if rel == Path::new(MANIFEST) {
                continue;
            }
            entry.insert(key(&rel), sha256_file(&dir.join(&rel))?);
        }
        Ok(())
    }

    pub fn output(&mut self, out: &Path, rel: &str) -> Result<()> {
        self.outputs.insert(rel.to_string(), sha256_file(&out.join(rel))?);
        Ok(())
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        let path = out.join(MANIFEST);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| file_error(&path, e))
    }
}
