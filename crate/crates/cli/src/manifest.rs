//! Run manifest: what went in, what came out, and with which parameters.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::failure::{read_input, write_output, Outcome};

#[derive(Debug, Clone, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub parameters: Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    /// Seconds since the Unix epoch. The only field that varies between
    /// identical runs.
    pub created_unix: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path, shown_as: String) -> Outcome<FileHash> {
    let bytes = read_input(path, "file")?;
    Ok(FileHash {
        path: shown_as,
        sha256: sha256_hex(&bytes),
    })
}

impl Manifest {
    pub fn new(command: &str, parameters: Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            parameters,
            inputs: Vec::new(),
            outputs: Vec::new(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Outcome<()> {
        self.inputs
            .push(hash_file(path, path.display().to_string())?);
        Ok(())
    }

    /// Outputs are recorded relative to the run directory.
    pub fn add_outputs(&mut self, run_dir: &Path, files: &[PathBuf]) -> Outcome<()> {
        for f in files {
            let rel = f.strip_prefix(run_dir).unwrap_or(f);
            self.outputs.push(hash_file(f, rel.display().to_string())?);
        }
        Ok(())
    }

    pub fn write(&self, run_dir: &Path) -> Outcome<PathBuf> {
        let path = run_dir.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serialises");
        bytes.push(b'\n');
        write_output(&path, &bytes)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
