//! Output staging. Every command assembles its artifacts in memory first and
//! writes them only once nothing can fail any more; each file goes through a
//! temporary sibling that is renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult, ExitCode};

#[derive(Debug, Default)]
pub struct Bundle {
    files: Vec<(String, Vec<u8>)>,
}

impl Bundle {
    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::new(ExitCode::Internal, format!("serialize: {e}")))?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    /// Writes every file under `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            write_atomic(&path, bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::from(e.error))?;
    Ok(())
}

/// Provenance record written next to a command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema: u32,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_path: Option<String>,
    /// Fully resolved configuration, defaults filled in.
    pub config: serde_json::Value,
    pub tool_version: String,
    pub seed: u64,
    pub out_dir: String,
    pub outputs: Vec<String>,
    /// Seconds since the Unix epoch; recorded only on request because it
    /// breaks byte-identical reruns.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&Path>, config: serde_json::Value, seed: u64, out_dir: &Path) -> Self {
        RunManifest {
            schema: decomp_lab::compose::SCHEMA_VERSION,
            command: command.to_string(),
            config_path: config_path.map(|p| p.display().to_string()),
            config,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            out_dir: out_dir.display().to_string(),
            outputs: Vec::new(),
            wall_clock: None,
        }
    }

    /// Adds the manifest itself to `bundle`, listing what the bundle holds.
    pub fn seal(mut self, bundle: &mut Bundle, wall_clock: bool) -> CliResult<()> {
        self.outputs = bundle.names().map(str::to_string).collect();
        if wall_clock {
            self.wall_clock = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs());
        }
        let name = format!("manifest_{}.json", self.command);
        bundle.add_json(name, &self)
    }
}

pub fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("configs serialize")
}
