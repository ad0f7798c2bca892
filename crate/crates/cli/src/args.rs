use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::format::{parse_point, parse_real, parse_real_list};

#[derive(Debug, Clone, Parser)]
#[command(
    name = "besov-sparse",
    version,
    about = "Besov norms, level-set sparseness and Navier-Stokes regularity diagnostics"
)]
pub struct Cli {
    /// Directory receiving the outputs and manifest.json
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Write a generated field to field.bsf1
    Field(FieldArgs),
    /// Sup, B^s_{inf,inf} and finite-difference B^eps_{1,1} norms of a field
    Norms(NormsArgs),
    /// Sparseness or semi-mixedness of a super-level set
    Sparseness(SparsenessArgs),
    /// Lemma, counterexample, mollified-log and calibration experiments
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Navier-Stokes run with the regularity monitor
    Simulate(SimulateArgs),
    /// Repeat a run recorded in a manifest
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Zero,
    Shear,
    TaylorGreen,
    RandomBand,
    /// Scalar A cos(k x_axis)
    Cosine,
    /// Scalar dome with a lightning rod
    Dome,
    /// Scalar mollified log
    MollifiedLog,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FieldArgs {
    #[arg(long, value_enum)]
    pub kind: FieldKind,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    /// Box side; defaults to 2*pi
    #[arg(long, value_parser = parse_real)]
    pub length: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_real, default_value = "1")]
    pub amplitude: f64,
    /// Band limit for random-band
    #[arg(long, default_value_t = 4)]
    pub kmax: u32,
    /// Integer wavenumber for cosine
    #[arg(long, default_value_t = 3)]
    pub mode: u32,
    /// Axis (1, 2 or 3) for cosine
    #[arg(long, default_value_t = 1)]
    pub axis: usize,
    /// Rod parameter for dome
    #[arg(long, default_value_t = 8)]
    pub n_rod: usize,
    /// Mollifier radius for mollified-log
    #[arg(long, value_parser = parse_real, default_value = "1/4")]
    pub eps: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NormsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Smoothness exponents for B^s_{inf,inf}
    #[arg(long, value_parser = parse_real_list, default_value = "-1,-1/2,0", allow_hyphen_values = true)]
    pub s: ::std::vec::Vec<f64>,
    /// Exponents for the finite-difference B^eps_{1,1} norm
    #[arg(long, value_parser = parse_real_list, default_value = "1/2,1")]
    pub eps: ::std::vec::Vec<f64>,
    /// Largest shift; defaults to L/4
    #[arg(long, value_parser = parse_real)]
    pub hmax: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[value(name = "1d")]
    #[serde(rename = "1d")]
    OneD,
    #[value(name = "3d")]
    #[serde(rename = "3d")]
    ThreeD,
    Semi,
    Mixed,
    Remark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SignArg {
    #[value(name = "+", alias = "plus")]
    #[serde(rename = "+")]
    Plus,
    #[value(name = "-", alias = "minus")]
    #[serde(rename = "-")]
    Minus,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SparsenessArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Component 1, 2 or 3; required for vector fields
    #[arg(long)]
    pub component: Option<usize>,
    #[arg(long, value_enum, default_value = "+", allow_hyphen_values = true)]
    pub sign: SignArg,
    /// Level as a fraction of the sup norm
    #[arg(long, value_parser = parse_real, default_value = "1/2")]
    pub lambda: f64,
    #[arg(long, value_parser = parse_real)]
    pub scale: f64,
    #[arg(long, value_parser = parse_real)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "semi")]
    pub mode: Mode,
    /// Centre x,y,z for the pointwise modes
    #[arg(long, value_parser = parse_point, default_value = "0,0,0", allow_hyphen_values = true)]
    pub center: [f64; 3],
    #[arg(long, default_value_t = besov_sparse::sparse::DEFAULT_DIRECTIONS)]
    pub ndir: usize,
}

#[derive(Debug, Clone, Subcommand)]
pub enum ExperimentCommand {
    /// Verdict of the mixing lemma on a velocity field
    Lemma(LemmaArgs),
    /// Dome-with-a-lightning-rod table
    Counterexample(CounterexampleArgs),
    /// Mollified-log table
    MollifiedLog(MollifiedLogArgs),
    /// Measure c* and write calibration.json
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LemmaArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "calibration.json")]
    pub calibration: PathBuf,
    #[arg(long, value_parser = parse_real)]
    pub scale: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CounterexampleArgs {
    #[arg(long = "n", value_parser = parse_count_list, default_value = "8,16,32,64")]
    pub n_list: ::std::vec::Vec<usize>,
    /// Cells per side of the level-set zoom box
    #[arg(long, default_value_t = besov_sparse::experiments::dome::DEFAULT_ZOOM_N)]
    pub zoom_n: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MollifiedLogArgs {
    #[arg(long, value_parser = parse_real_list, default_value = "1/8,1/16,1/32,1/64")]
    pub eps: ::std::vec::Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, value_parser = parse_real)]
    pub length: Option<f64>,
    #[arg(long, value_parser = parse_real, default_value = "1")]
    pub eps: f64,
    #[arg(long, value_parser = parse_real, default_value = "1/2")]
    pub lambda: f64,
    #[arg(long, value_parser = parse_real, default_value = "3/4")]
    pub delta: f64,
    #[arg(long, default_value_t = 40)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

fn parse_count_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',').map(|p| p.trim().parse().map_err(|_| format!("{p:?} is not a count"))).collect()
}
