//! Provenance manifest written next to every artifact: the seed(s), an echo
//! of the parsed config, its hash, and the tool version. Reruns with equal
//! manifests produce byte-identical data files.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Serialize)]
pub struct Manifest<C: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: serde_json::Value,
    pub config: C,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<serde_json::Value>,
}

pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let canonical = serde_json::to_string(config)
        .map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(format!("{:x}", hasher.finalize()))
}

impl<C: Serialize> Manifest<C> {
    pub fn new(command: &'static str, seed: serde_json::Value, config: C) -> Result<Self> {
        let config_hash = config_hash(&config)?;
        Ok(Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            config_hash,
            dims: None,
        })
    }

    pub fn with_dims(mut self, dims: serde_json::Value) -> Self {
        self.dims = Some(dims);
        self
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Config(format!("cannot serialize manifest: {e}")))?;
        fs::write(path, text + "\n")
            .map_err(|e| CliError::Data(format!("cannot write {}: {}", path.display(), e)))
    }
}
