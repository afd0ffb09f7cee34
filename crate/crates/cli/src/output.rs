//! Atomic output files and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use mdev_core::efficiency::sha256_hex;
use serde::Serialize;
use tempfile::NamedTempFile;

/// One output of a subcommand. The first artifact is the primary one.
#[derive(Debug)]
pub struct Artifact {
    pub extension: &'static str,
    pub bytes: Vec<u8>,
}

/// Everything a subcommand produced, before it is written anywhere.
#[derive(Debug)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    /// The effective configuration, hashed into the manifest.
    pub config: serde_json::Value,
    pub master_seed: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub subcommand: String,
    pub args: Vec<String>,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub master_seed: Option<u64>,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: String,
    pub wall_time_seconds: f64,
    pub outputs: Vec<OutputRecord>,
}

/// Writes `bytes` to a temporary file next to `path`, then renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// `report.json` → `report.manifest.json`
pub fn manifest_path(primary: &Path) -> PathBuf {
    let stem = primary.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    primary.with_file_name(format!("{stem}.manifest.json"))
}

pub struct RunClock {
    started_at: String,
    start: Instant,
}

impl RunClock {
    pub fn start() -> Self {
        RunClock {
            started_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            start: Instant::now(),
        }
    }
}

/// Writes every artifact under `out` (extensions swapped for secondary
/// artifacts) and the manifest beside them.
pub fn write_outputs(
    out: &Path,
    output: &RunOutput,
    subcommand: &str,
    args: Vec<String>,
    threads: usize,
    clock: RunClock,
) -> Result<Vec<PathBuf>, crate::CliError> {
    let mut records = Vec::new();
    let mut written = Vec::new();
    for (i, art) in output.artifacts.iter().enumerate() {
        let path = if i == 0 { out.to_path_buf() } else { out.with_extension(art.extension) };
        write_atomic(&path, &art.bytes)?;
        records.push(OutputRecord {
            path: path.display().to_string(),
            bytes: art.bytes.len(),
            sha256: sha256_hex(&art.bytes),
        });
        written.push(path);
    }
    let config_hash = mdev_core::efficiency::canonical_hash(&output.config)?;
    let manifest = RunManifest {
        tool: "mdev",
        tool_version: env!("CARGO_PKG_VERSION"),
        subcommand: subcommand.to_string(),
        args,
        config_hash,
        config: output.config.clone(),
        master_seed: output.master_seed,
        threads,
        started_at: clock.started_at,
        finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        wall_time_seconds: clock.start.elapsed().as_secs_f64(),
        outputs: records,
    };
    let path = manifest_path(out);
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write_atomic(&path, &bytes)?;
    written.push(path);
    Ok(written)
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, crate::CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}
