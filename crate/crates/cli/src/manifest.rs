use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::args::Command;
use crate::error::{CliError, CliResult};

/// Everything needed to re-run a command: the full parameter set, the
/// channel spec itself (not just its path) and the seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub seeds: Vec<u64>,
    /// Canonical spec document, when the command used a channel.
    pub channel_spec: Option<serde_json::Value>,
    pub channel_hash: Option<String>,
    pub workers: usize,
    pub duration_secs: f64,
    pub outputs: Vec<PathBuf>,
    /// Headline numbers, for reading without opening the outputs.
    pub result: serde_json::Value,
}

impl RunManifest {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: not a run manifest: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }
}

/// `<path>.manifest.json`
pub fn manifest_path(primary: &Path) -> PathBuf {
    suffixed(primary, ".manifest.json")
}

pub fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Replaces the extension: `curve.csv` -> `curve<tail>`.
pub fn sibling(path: &Path, tail: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{tail}"))
}
