//! Run manifests: what went in, what came out, with SHA-256 checksums.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub gmres_tol: f64,
    pub threads: Option<usize>,
    /// Input name to checksum.
    pub inputs: BTreeMap<String, String>,
    /// Output file, relative to the output directory, to checksum.
    pub outputs: BTreeMap<String, String>,
    /// Outputs that carry wall-clock times and so differ between reruns.
    pub volatile: Vec<String>,
}

/// Writes files into the output directory and records their checksums.
pub struct OutputDir {
    root: PathBuf,
    manifest: Manifest,
}

impl OutputDir {
    pub fn new(root: &Path, manifest: Manifest) -> Self {
        OutputDir {
            root: root.to_path_buf(),
            manifest,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn add_input(&mut self, name: &str, sha: String) {
        self.manifest.inputs.insert(name.to_string(), sha);
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        refltomo::io::write_atomic(&path, bytes)?;
        self.manifest.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Writes a file that is listed in the manifest without a checksum.
    pub fn write_volatile(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        refltomo::io::write_atomic(&self.path(name), bytes)?;
        self.manifest.volatile.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest-<command>.json` last so it lists every output.
    /// Each command has its own manifest, so an invert run does not
    /// clobber the record of the synthesis that fed it.
    pub fn finish(self) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        refltomo::io::write_atomic(&self.path(&format!("manifest-{}.json", self.manifest.command)), text.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
