//! Sparseness of level sets along segments and in balls, and semi-mixedness.
//!
//! A ball `B(x₀, r)` is the set of cell centres within distance `r` of `x₀`
//! (minimum image). The same membership rule drives the direct counts and
//! the FFT convolution kernel, so the two routes agree exactly at cell
//! centres.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fft::Fft3;
use crate::fields::{Grid3, LevelSet, Point};

/// Volume of the unit ball in ℝ³.
pub const PI3: f64 = 4.0 * std::f64::consts::PI / 3.0;

/// Tolerance added to `δ^{1/3}` when searching for a 1D witness.
pub const REMARK_TOLERANCE: f64 = 0.05;

pub const DEFAULT_DIRECTIONS: usize = 64;
pub const MIN_DIRECTIONS: usize = 26;

const BALL_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SparsenessKind {
    #[serde(rename = "oneD")]
    OneD,
    #[serde(rename = "threeD")]
    ThreeD,
    #[serde(rename = "semiMixed")]
    SemiMixed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SparsenessReport {
    pub kind: SparsenessKind,
    pub r: f64,
    /// Measured fraction; for semi-mixed reports the maximum over centres.
    pub ratio: f64,
    /// `x₀`, or the argmax centre for semi-mixed reports.
    pub location: Point,
    pub direction: Option<[f64; 3]>,
    pub ndir: Option<usize>,
    pub delta_target: f64,
    pub pass: bool,
}

impl SparsenessReport {
    fn new(kind: SparsenessKind, r: f64, ratio: f64, location: Point, delta: f64) -> Self {
        Self { kind, r, ratio, location, direction: None, ndir: None, delta_target: delta, pass: ratio <= delta }
    }
}

fn check_scale(grid: &Grid3, r: f64) -> Result<()> {
    if !(r > 0.0 && r <= 0.25 * grid.length() * (1.0 + 1e-12)) {
        return invalid(format!("scale {r} outside (0, L/4] with L = {}", grid.length()));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("ratio {delta} outside (0, 1)"));
    }
    Ok(())
}

#[inline]
fn in_ball(offset: [f64; 3], radius_cells: f64) -> bool {
    offset[0] * offset[0] + offset[1] * offset[1] + offset[2] * offset[2] <= radius_cells * radius_cells + BALL_SLACK
}

/// Near-uniform unit directions on a Fibonacci spiral.
pub fn fibonacci_directions(ndir: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..ndir)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / ndir as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// Fraction of the segment `(x₀ − r d, x₀ + r d)` inside `S`, by midpoint
/// sampling at `⌈4r/h⌉` points with nearest-voxel lookup.
pub fn segment_fraction(set: &LevelSet, x0: Point, r: f64, d: [f64; 3]) -> f64 {
    let g = set.grid();
    let m = ((4.0 * r / g.spacing()).ceil() as usize).max(1);
    let step = 2.0 * r / m as f64;
    let hits = (0..m)
        .filter(|&k| {
            let s = -r + (k as f64 + 0.5) * step;
            set.contains(g.voxel_of([x0[0] + s * d[0], x0[1] + s * d[1], x0[2] + s * d[2]]))
        })
        .count();
    hits as f64 / m as f64
}

/// 1D sparseness around `x₀`: the smallest segment fraction over `ndir`
/// sampled directions.
pub fn sparseness_1d(set: &LevelSet, x0: Point, r: f64, ndir: usize, delta: f64) -> Result<SparsenessReport> {
    check_scale(set.grid(), r)?;
    if ndir < MIN_DIRECTIONS {
        return invalid(format!("need at least {MIN_DIRECTIONS} directions, got {ndir}"));
    }
    let dirs = fibonacci_directions(ndir);
    let fractions: Vec<f64> = dirs.par_iter().map(|&d| segment_fraction(set, x0, r, d)).collect();
    let (best, ratio) =
        fractions.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &f)| if f < acc.1 { (i, f) } else { acc });
    let mut report = SparsenessReport::new(SparsenessKind::OneD, r, ratio, x0, delta);
    report.direction = Some(dirs[best]);
    report.ndir = Some(ndir);
    Ok(report)
}

/// Cell centres of `B(x₀, r)` and how many of them lie in `S`.
pub fn ball_counts(set: &LevelSet, x0: Point, r: f64) -> (usize, usize) {
    let g = set.grid();
    let n = g.n() as i64;
    let rc = r / g.spacing();
    let reach = rc.ceil() as i64 + 1;
    let (ci, cj, ck) = g.unravel(g.voxel_of(x0));
    let (mut total, mut inside) = (0, 0);
    for dk in -reach..=reach {
        let k = (ck as i64 + dk).rem_euclid(n) as usize;
        for dj in -reach..=reach {
            let j = (cj as i64 + dj).rem_euclid(n) as usize;
            for di in -reach..=reach {
                let i = (ci as i64 + di).rem_euclid(n) as usize;
                let idx = g.index(i, j, k);
                if in_ball(g.offset_in_cells(x0, idx), rc) {
                    total += 1;
                    inside += set.contains(idx) as usize;
                }
            }
        }
    }
    (total, inside)
}

/// 3D sparseness: the fraction of `B(x₀, r)` occupied by `S`.
pub fn sparseness_3d(set: &LevelSet, x0: Point, r: f64, delta: f64) -> Result<SparsenessReport> {
    check_scale(set.grid(), r)?;
    let (total, inside) = ball_counts(set, x0, r);
    if total == 0 {
        return Err(Error::DegenerateScale(format!("ball of radius {r} contains no cell centres")));
    }
    Ok(SparsenessReport::new(SparsenessKind::ThreeD, r, inside as f64 / total as f64, x0, delta))
}

/// Integer offsets of the discrete ball of radius `r` centred on a cell.
fn ball_kernel(grid: &Grid3, r: f64) -> (Vec<f64>, usize) {
    let rc = r / grid.spacing();
    let mut count = 0;
    let kernel = (0..grid.len())
        .map(|idx| {
            let (i, j, k) = grid.unravel(idx);
            let o = [grid.signed_mode(i), grid.signed_mode(j), grid.signed_mode(k)].map(|v| v as f64);
            if in_ball(o, rc) {
                count += 1;
                1.0
            } else {
                0.0
            }
        })
        .collect();
    (kernel, count)
}

/// Fraction of `B(x, r) ∩ S` at every cell centre `x`, by FFT convolution.
/// Counts are rounded to integers, which removes transform noise exactly.
pub fn local_fractions(set: &LevelSet, r: f64) -> Result<Vec<f64>> {
    let g = set.grid();
    check_scale(g, r)?;
    if r < 0.5 * g.spacing() {
        return Err(Error::DegenerateScale(format!("scale {r} is below half a cell ({})", 0.5 * g.spacing())));
    }
    let fft = Fft3::for_grid(g);
    let (kernel, count) = ball_kernel(g, r);
    let kernel_hat = fft.forward_real(&kernel);
    let mut mask_hat = fft.forward_real(&set.mask().iter().map(|&b| b as u8 as f64).collect::<Vec<_>>());
    mask_hat.iter_mut().zip(&kernel_hat).for_each(|(a, b): (&mut Complex64, _)| *a *= b);
    let conv = fft.inverse_real(mask_hat);
    let total = count as f64;
    Ok(conv.into_iter().map(|c| c.round().clamp(0.0, total) / total).collect())
}

/// `S` is `r`-semi-mixed with ratio `δ` when every ball of radius `r` is at
/// most a `δ` fraction full.
pub fn semi_mixed(set: &LevelSet, r: f64, delta: f64) -> Result<SparsenessReport> {
    check_delta(delta)?;
    let fractions = local_fractions(set, r)?;
    let (arg, max) =
        fractions.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &f)| if f > acc.1 { (i, f) } else { acc });
    Ok(SparsenessReport::new(SparsenessKind::SemiMixed, r, max, set.grid().center(arg), delta))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixedReport {
    pub set: SparsenessReport,
    pub complement: SparsenessReport,
    pub pass: bool,
}

/// Semi-mixedness of both `S` and its complement.
pub fn mixed(set: &LevelSet, r: f64, delta: f64) -> Result<MixedReport> {
    let a = semi_mixed(set, r, delta)?;
    let b = semi_mixed(&set.complement(), r, delta)?;
    let pass = a.pass && b.pass;
    Ok(MixedReport { set: a, complement: b, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemarkReport {
    pub three_d: SparsenessReport,
    /// The 3D hypothesis failed, so nothing was checked.
    pub vacuous: bool,
    pub target: f64,
    pub tolerance: f64,
    /// Passing 1D report, or the best one found when none passes.
    pub witness: Option<SparsenessReport>,
    pub pass: bool,
}

/// Checks that 3D `δ`-sparseness at scale `r` yields a 1D segment with
/// fraction at most `δ^{1/3}` (plus sampling tolerance) at some scale
/// `ρ ∈ {r, r/2, r/4, r/8}`.
pub fn remark_3d_implies_1d(set: &LevelSet, x0: Point, r: f64, delta: f64, ndir: usize) -> Result<RemarkReport> {
    let three_d = sparseness_3d(set, x0, r, delta)?;
    let target = delta.cbrt() + REMARK_TOLERANCE;
    if !three_d.pass {
        return Ok(RemarkReport {
            three_d,
            vacuous: true,
            target,
            tolerance: REMARK_TOLERANCE,
            witness: None,
            pass: true,
        });
    }
    let mut best: Option<SparsenessReport> = None;
    for level in 0..4 {
        let rho = r / f64::powi(2.0, level);
        let rep = sparseness_1d(set, x0, rho, ndir, target)?;
        if rep.pass {
            return Ok(RemarkReport {
                three_d,
                vacuous: false,
                target,
                tolerance: REMARK_TOLERANCE,
                witness: Some(rep),
                pass: true,
            });
        }
        if best.as_ref().is_none_or(|b| rep.ratio < b.ratio) {
            best = Some(rep);
        }
    }
    Ok(RemarkReport { three_d, vacuous: false, target, tolerance: REMARK_TOLERANCE, witness: best, pass: false })
}
