//! The simulation config file.

use std::path::{Path, PathBuf};

use besov_sparse::nse::Preset;
use serde::{Deserialize, Serialize};

use crate::{exit, CliError, CliResult};

fn one() -> f64 {
    1.0
}

fn two_pi() -> f64 {
    std::f64::consts::TAU
}

fn one_step() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    #[serde(rename = "L", default = "two_pi")]
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    #[serde(rename = "C_M", default = "one")]
    pub c_m: f64,
    #[serde(rename = "Ctilde_M", default = "one")]
    pub ctilde_m: f64,
    /// Either `c_star` or a `calibration` file must be given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    #[serde(default)]
    pub subtract_mean: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub grid: GridSpec,
    #[serde(default = "one")]
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one_step")]
    pub cadence: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    /// BSF1 velocity file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub constants: ConstantsSpec,
    #[serde(default)]
    pub flags: Flags,
    /// Write a BSF1 snapshot every this many steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
}

impl SimulationConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| CliError::new(exit::IO, format!("{}: {e}", path.display())))?;
        match (&cfg.preset, &cfg.input) {
            (Some(_), Some(_)) => Err(CliError::param("config gives both `preset` and `input`")),
            (None, None) => Err(CliError::param("config needs `preset` or `input`")),
            _ => Ok(cfg),
        }
    }
}

/// Resolves `p` against the directory of `base`.
pub fn relative_to(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new("")).join(p)
    }
}
