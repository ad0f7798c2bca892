//! `manifest.json`: what was run, with which inputs, producing which files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::format::write_json;
use crate::{exit, CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileRef {
    pub fn of(path: &Path) -> CliResult<Self> {
        Ok(Self { path: path.to_path_buf(), sha256: sha256_file(path)? })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments as given, program name first, without `--out-dir`.
    pub argv: Vec<String>,
    /// Working directory relative paths in `argv` refer to.
    pub cwd: PathBuf,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub calibration: Option<FileRef>,
    pub inputs: Vec<FileRef>,
    pub outputs: Vec<FileRef>,
    pub threads: usize,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let m: Self =
            serde_json::from_str(&text).map_err(|e| CliError::new(exit::IO, format!("{}: {e}", path.display())))?;
        if m.schema != SCHEMA {
            return Err(CliError::new(
                exit::IO,
                format!("{}: unsupported manifest schema {}", path.display(), m.schema),
            ));
        }
        Ok(m)
    }

    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        write_json(&path, self).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Drops `--out-dir` and its value from an argument list.
pub fn strip_out_dir(argv: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
        } else if a == "--out-dir" {
            skip = true;
        } else if !a.starts_with("--out-dir=") {
            out.push(a.clone());
        }
    }
    out
}
