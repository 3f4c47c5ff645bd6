use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub subtranx: &'static str,
    pub checkpoint: u32,
}

/// What a run read and wrote. Contains no timestamps, so equal inputs give
/// byte-identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    /// Input path to sha256 hex digest.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub versions: Versions,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Manifest {
        Manifest {
            command: command.to_string(),
            seed: config.seed,
            config: config.clone(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            versions: Versions {
                subtranx: env!("CARGO_PKG_VERSION"),
                checkpoint: subtranx::neural::CHECKPOINT_VERSION,
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let digest = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }
}

/// `<file>.<suffix>.json` next to `file`.
pub fn beside(file: &Path, suffix: &str) -> PathBuf {
    let mut name = file
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(format!(".{suffix}.json"));
    file.with_file_name(name)
}
