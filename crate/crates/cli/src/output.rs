//! File output. Payloads are pure functions of their inputs; wall-clock
//! time only ever lands in `*.run.json` sidecars.

use std::path::{Path, PathBuf};

use serde::Serialize;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::CliError;

pub const SIDECAR_SCHEMA_VERSION: u32 = 1;

pub fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("payload serializes");
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// `dir/name.json` → `dir/name.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    schema_version: u32,
    command: &'a str,
    tool_version: &'a str,
    config_sha256: &'a str,
    created_utc: String,
    outputs: Vec<String>,
}

/// Writes `<payload stem>.run.json` next to `payload`.
pub fn write_sidecar(payload: &Path, command: &str, config_hash: &str, outputs: &[PathBuf]) -> Result<(), CliError> {
    let created_utc = OffsetDateTime::now_utc().format(&Rfc3339).unwrap_or_default();
    let sc = Sidecar {
        schema_version: SIDECAR_SCHEMA_VERSION,
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        config_sha256: config_hash,
        created_utc,
        outputs: outputs
            .iter()
            .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
            .collect(),
    };
    write_json(&sibling(payload, "run.json"), &sc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_replaces_extension() {
        assert_eq!(sibling(Path::new("a/b/mp.json"), "run.json"), PathBuf::from("a/b/mp.run.json"));
        assert_eq!(sibling(Path::new("x.csv"), "svg"), PathBuf::from("x.svg"));
    }

    #[test]
    fn write_creates_parent_dirs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/deeper/f.txt");
        write_bytes(&p, b"ok").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"ok");
    }

    #[test]
    fn unwritable_target_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"").unwrap();
        let err = write_bytes(&blocker.join("x.json"), b"{}").unwrap_err();
        assert_eq!(err.exit_code(), 5);
    }
}
