//! Output plumbing: checksums, atomic file writes, CSV buffers, and the
//! per-run manifest that makes every output reproducible from its recorded
//! configuration and seed.

use crate::config::Settings;
use crate::Failure;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Write through a temporary file in the same directory plus a rename, so
/// an interrupted run cannot leave a truncated file under the final name.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)
        .map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
    let name = path
        .file_name()
        .ok_or_else(|| Failure::Io(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!("{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Failure::Io(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Failure::Io(format!("cannot move {} into place: {e}", path.display()))
    })
}

/// Build a CSV in memory and return its bytes.
pub fn csv_bytes<F>(build: F) -> Result<Vec<u8>, Failure>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<(), csv::Error>,
{
    let mut writer = csv::Writer::from_writer(Vec::new());
    build(&mut writer).map_err(|e| Failure::Io(format!("cannot build CSV: {e}")))?;
    writer.into_inner().map_err(|e| Failure::Io(format!("cannot flush CSV: {e}")))
}

/// One finished output file, as recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    /// Data rows for CSVs, entries for JSON documents.
    pub rows: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    threads: Option<usize>,
    config_sha256: &'a str,
    data_path: Option<String>,
    data_sha256: Option<&'a String>,
    outputs: &'a [OutputRecord],
    details: &'a serde_json::Value,
    /// The fully resolved configuration; rerunning the command with this
    /// configuration and seed reproduces every output byte for byte.
    config: &'a serde_json::Value,
}

/// Collects a run's outputs and writes them plus `<command>-manifest.json`
/// into the output directory.
pub struct RunWriter<'a> {
    settings: &'a Settings,
    outputs: Vec<OutputRecord>,
    data_path: Option<String>,
    data_sha256: Option<String>,
    details: serde_json::Map<String, serde_json::Value>,
}

impl<'a> RunWriter<'a> {
    pub fn new(settings: &'a Settings) -> Self {
        Self {
            settings,
            outputs: Vec::new(),
            data_path: None,
            data_sha256: None,
            details: serde_json::Map::new(),
        }
    }

    /// Record the input data file and its checksum.
    pub fn set_data(&mut self, path: &Path, bytes: &[u8]) {
        self.data_path = Some(path.display().to_string());
        self.data_sha256 = Some(sha256_hex(bytes));
    }

    /// Attach a command-specific entry to the manifest.
    pub fn detail(&mut self, key: &str, value: serde_json::Value) {
        self.details.insert(key.to_string(), value);
    }

    pub fn write_file(&mut self, name: &str, bytes: &[u8], rows: usize) -> Result<(), Failure> {
        let path = self.settings.out_dir.join(name);
        atomic_write(&path, bytes)?;
        self.outputs.push(OutputRecord {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
            rows,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| Failure::Io(format!("cannot serialize {name}: {e}")))?;
        bytes.push(b'\n');
        self.write_file(name, &bytes, 1)
    }

    /// Write the manifest and finish the run.
    pub fn finish(self) -> Result<PathBuf, Failure> {
        let details = serde_json::Value::Object(self.details);
        let manifest = Manifest {
            tool: "dah",
            version: env!("CARGO_PKG_VERSION"),
            command: self.settings.command,
            seed: self.settings.seed,
            threads: self.settings.threads,
            config_sha256: &self.settings.config_sha256,
            data_path: self.data_path,
            data_sha256: self.data_sha256.as_ref(),
            outputs: &self.outputs,
            details: &details,
            config: &self.settings.resolved,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| Failure::Io(format!("cannot serialize manifest: {e}")))?;
        bytes.push(b'\n');
        let path = self.settings.out_dir.join(format!("{}-manifest.json", self.settings.command));
        atomic_write(&path, &bytes)?;
        Ok(path)
    }
}
