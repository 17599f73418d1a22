//! JSON run manifests: the resolved configuration plus checksums of every
//! output, sufficient to re-run and verify a run bit for bit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::commands::{sha256_hex, Command, CommandOutput};
use super::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChecksum {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub master_seed: u64,
    /// Informational; outputs do not depend on it.
    pub workers: usize,
    pub outputs: Vec<FileChecksum>,
    pub cell_checksums: Vec<String>,
    pub diagnostics: serde_json::Value,
    pub exit_code: i32,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: Command, config: &RunConfig, output: &CommandOutput, workers: usize, seconds: f64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            config: config.clone(),
            master_seed: config.method.seed,
            workers,
            outputs: output
                .files
                .iter()
                .map(|f| FileChecksum {
                    file: f.name.clone(),
                    sha256: sha256_hex(&f.contents),
                })
                .collect(),
            cell_checksums: output.cell_checksums.clone(),
            diagnostics: output.diagnostics.clone(),
            exit_code: output.status.code(),
            wall_clock_seconds: seconds,
        }
    }

    pub fn path_in(dir: &Path) -> PathBuf {
        dir.join(MANIFEST_FILE)
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = Self::path_in(dir);
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Differences in outputs and per-cell checksums; empty when `other`
    /// reproduces `self`.
    pub fn mismatches(&self, other: &RunManifest) -> Vec<String> {
        let mut out = Vec::new();
        if self.command != other.command {
            out.push(format!("command {} vs {}", self.command.as_str(), other.command.as_str()));
        }
        for f in &self.outputs {
            match other.outputs.iter().find(|g| g.file == f.file) {
                None => out.push(format!("{} missing from re-run", f.file)),
                Some(g) if g.sha256 != f.sha256 => out.push(format!("{} checksum differs", f.file)),
                Some(_) => {}
            }
        }
        for g in other.outputs.iter().filter(|g| !self.outputs.iter().any(|f| f.file == g.file)) {
            out.push(format!("{} not in original run", g.file));
        }
        if self.cell_checksums.len() != other.cell_checksums.len() {
            out.push(format!(
                "{} cells vs {}",
                self.cell_checksums.len(),
                other.cell_checksums.len()
            ));
        } else {
            for (i, (a, b)) in self.cell_checksums.iter().zip(&other.cell_checksums).enumerate() {
                if a != b {
                    out.push(format!("cell {i} checksum differs"));
                }
            }
        }
        out
    }
}
