use std::path::{Path, PathBuf};
use std::time::Instant;

use calibkit::io;
use calibkit::Result;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

/// Provenance of one invocation, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub version: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub wall_clock_s: f64,
}

pub struct Recorder {
    command: String,
    seed: u64,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl Recorder {
    pub fn new(command: &str, seed: u64) -> Self {
        Recorder {
            command: command.to_string(),
            seed,
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn config<T: Serialize>(&mut self, value: &T) {
        self.config = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Hashes inputs and outputs (directories file by file) and writes the
    /// manifest to `path`.
    pub fn finish(self, path: &Path) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            args: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            config: self.config,
            inputs: records(&self.inputs)?,
            outputs: records(&self.outputs)?,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        };
        io::write_json(path, &manifest)
    }
}

fn records(paths: &[PathBuf]) -> Result<Vec<FileRecord>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            entries.retain(|e| !e.to_string_lossy().ends_with("manifest.json"));
            entries.sort();
            out.extend(records(&entries)?);
        } else {
            out.push(FileRecord {
                path: p.display().to_string(),
                sha256: io::hash_file(p)?,
            });
        }
    }
    Ok(out)
}

/// Manifest location for an output: `<dir>/manifest.json` for directories,
/// `<file>.manifest.json` otherwise.
pub fn manifest_path(output: &Path) -> PathBuf {
    if output.is_dir() {
        output.join("manifest.json")
    } else {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        output.with_file_name(name)
    }
}
