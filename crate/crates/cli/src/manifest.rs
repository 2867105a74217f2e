use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use hsst::output::SCHEMA_VERSION;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub parameters: Value,
    pub tool_version: String,
    pub timestamp: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, parameters: Value, outputs: Vec<PathBuf>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            parameters,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            outputs,
        }
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn partial_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    out.with_file_name(name)
}

/// Writes `body` to `out` through a sibling temporary file, then the run
/// manifest next to it. Nothing is left behind if either write fails.
pub fn write_with_manifest(out: &Path, body: &[u8], manifest: &RunManifest) -> std::io::Result<()> {
    let tmp = partial_path(out);
    let mpath = manifest_path(out);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(body)?;
        f.sync_all()?;
        fs::rename(&tmp, out)?;
        let json = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
        fs::write(&mpath, json + "\n")
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
        let _ = fs::remove_file(out);
        let _ = fs::remove_file(&mpath);
    }
    result
}
