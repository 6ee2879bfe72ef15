use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const MANIFEST_SUFFIX: &str = ".manifest.json";

/// Provenance of one command invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario_path: Option<PathBuf>,
    /// sha256 of the scenario file bytes (or of the resolved scenario for
    /// `evaluate`, which reads it from the records header).
    pub scenario_hash: Option<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
    pub artifacts: Vec<PathBuf>,
    pub tool_version: String,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        Self {
            command: command.to_string(),
            scenario_path: None,
            scenario_hash: None,
            config: serde_json::Value::Null,
            seed: None,
            started_at: now(),
            finished_at: String::new(),
            artifacts: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn scenario(&mut self, path: &Path, hash: String) {
        self.scenario_path = Some(path.to_path_buf());
        self.scenario_hash = Some(hash);
    }

    pub fn file_name(command: &str) -> String {
        format!("{command}{MANIFEST_SUFFIX}")
    }

    /// Stamps the end time and writes `<command>.manifest.json` into `dir`.
    pub fn finish(&mut self, dir: &Path) -> Result<PathBuf, CliError> {
        self.finished_at = now();
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
        let path = dir.join(Self::file_name(&self.command));
        let json = serde_json::to_vec_pretty(self).expect("manifest serializes");
        write_atomic(&path, &json).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        Ok(path)
    }
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut f = std::fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    std::fs::rename(&tmp, path)
}
