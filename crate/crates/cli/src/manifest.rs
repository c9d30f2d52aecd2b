use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub failures: Vec<Failure>,
    pub algorithm: Option<String>,
    pub config: Value,
    pub transforms: Option<Value>,
    pub tool_version: String,
    pub wall_time_seconds: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

#[derive(Debug, Serialize)]
pub struct Failure {
    pub input: PathBuf,
    pub error: String,
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            failures: Vec::new(),
            algorithm: None,
            config: Value::Null,
            transforms: None,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: 0.0,
            started: Some(Instant::now()),
        }
    }

    pub fn fail(&mut self, input: &Path, error: impl std::fmt::Display) {
        eprintln!("error: {}: {error:#}", input.display());
        self.failures.push(Failure {
            input: input.to_path_buf(),
            error: format!("{error:#}"),
        });
    }

    pub fn finish(mut self, path: &Path) -> Result<bool> {
        if let Some(t) = self.started {
            self.wall_time_seconds = t.elapsed().as_secs_f64();
        }
        write_atomic(path, serde_json::to_string_pretty(&self)?.as_bytes())?;
        Ok(self.failures.is_empty())
    }
}

/// Writes through a temporary file in the destination directory, then
/// renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// `out.png` -> `out.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}
