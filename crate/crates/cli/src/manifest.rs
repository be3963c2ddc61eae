use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use nsgls_core::error::{Error, Result};

/// Provenance record written once into every output directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub tool_version: String,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: Option<&Path>, out_dir: &Path, seed: u64, started: Instant) -> Self {
        Self {
            command: command.into(),
            config_path: config.map(Path::to_path_buf),
            out_dir: out_dir.to_path_buf(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            wall_time_s: started.elapsed().as_secs_f64(),
        }
    }

    pub fn write(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(self.out_dir.join("manifest.json"), text)?;
        Ok(())
    }
}
