//! Run directories and atomic file output.
//!
//! Every experiment or sweep claims the next free `prefix_NN` directory
//! under its output parent and writes a `manifest.json` listing input
//! and artifact checksums. Files are always written through a temp file
//! in the destination directory plus an atomic rename, so readers never
//! observe a half-written artifact and aborted runs leave no partial
//! files behind.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{io_context, CliError};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(io_context(format!("cannot hash {}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Writes `bytes` to `path` via temp file + rename in one directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)
        .map_err(io_context(format!("cannot create {}", parent.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&parent).map_err(io_context(format!(
        "cannot stage write in {}",
        parent.display()
    )))?;
    tmp.write_all(bytes)
        .map_err(io_context(format!("cannot write {}", path.display())))?;
    tmp.persist(path).map_err(|err| CliError::Io {
        context: format!("cannot finish writing {}", path.display()),
        source: err.error,
    })?;
    Ok(())
}

/// Like [`write_atomic`] but for writers that need a path of their own
/// (for example the dataset serializer): `fill` writes the temp file,
/// then it is renamed over `path`.
pub fn write_atomic_with(
    path: &Path,
    fill: impl FnOnce(&Path) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)
        .map_err(io_context(format!("cannot create {}", parent.display())))?;
    let tmp = tempfile::NamedTempFile::new_in(&parent).map_err(io_context(format!(
        "cannot stage write in {}",
        parent.display()
    )))?;
    fill(tmp.path())?;
    tmp.persist(path).map_err(|err| CliError::Io {
        context: format!("cannot finish writing {}", path.display()),
        source: err.error,
    })?;
    Ok(())
}

/// Claims the lowest free `{prefix}_{NN}` directory under `parent`.
pub fn next_run_dir(parent: &Path, prefix: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(parent)
        .map_err(io_context(format!("cannot create {}", parent.display())))?;
    let mut highest = 0usize;
    let entries =
        fs::read_dir(parent).map_err(io_context(format!("cannot list {}", parent.display())))?;
    for entry in entries {
        let entry = entry.map_err(io_context(format!("cannot list {}", parent.display())))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(rest) = name.strip_prefix(prefix).and_then(|r| r.strip_prefix('_')) else {
            continue;
        };
        if let Ok(n) = rest.parse::<usize>() {
            highest = highest.max(n);
        }
    }
    // create_dir is the claim; on a collision move on to the next slot.
    for n in highest + 1.. {
        let dir = parent.join(format!("{prefix}_{n:02}"));
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(err) if err.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(err) => {
                return Err(io_context(format!("cannot create {}", dir.display()))(err));
            }
        }
    }
    unreachable!("run numbering is unbounded");
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
}

/// What went into a run and what came out, checksummed. `inputs` are
/// recorded by the paths the user gave; `artifacts` are relative to the
/// run directory. The manifest itself is excluded from its own listing.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub command: String,
    pub config_sha256: String,
    pub inputs: Vec<ManifestFile>,
    pub artifacts: Vec<ManifestFile>,
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let entries =
        fs::read_dir(dir).map_err(io_context(format!("cannot list {}", dir.display())))?;
    for entry in entries {
        let entry = entry.map_err(io_context(format!("cannot list {}", dir.display())))?;
        let path = entry.path();
        let kind = entry
            .file_type()
            .map_err(io_context(format!("cannot stat {}", path.display())))?;
        if kind.is_dir() {
            collect_files(&path, out)?;
        } else if kind.is_file() {
            out.push(path);
        }
    }
    Ok(())
}

/// Walks the run directory, hashes every artifact plus the named input
/// files, and writes `manifest.json`.
pub fn write_manifest(
    run_dir: &Path,
    command: &str,
    config_sha256: &str,
    inputs: &[PathBuf],
) -> Result<(), CliError> {
    let mut input_records = Vec::with_capacity(inputs.len());
    for path in inputs {
        input_records.push(ManifestFile {
            path: path.display().to_string(),
            sha256: file_sha256(path)?,
        });
    }
    input_records.sort_by(|a, b| a.path.cmp(&b.path));

    let mut files = Vec::new();
    collect_files(run_dir, &mut files)?;
    let mut artifacts = Vec::with_capacity(files.len());
    for path in files {
        let rel = path
            .strip_prefix(run_dir)
            .expect("collected under run dir")
            .to_string_lossy()
            .into_owned();
        if rel == "manifest.json" {
            continue;
        }
        artifacts.push(ManifestFile {
            path: rel,
            sha256: file_sha256(&path)?,
        });
    }
    artifacts.sort_by(|a, b| a.path.cmp(&b.path));

    let manifest = RunManifest {
        format: "run-manifest".into(),
        version: 1,
        command: command.into(),
        config_sha256: config_sha256.into(),
        inputs: input_records,
        artifacts,
    };
    let body = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_atomic(&run_dir.join("manifest.json"), &body)
}
