//! Littlewood–Paley blocks and Besov norms.
//!
//! The low block is `φ₋₁ = χ` with `χ(ξ) = 1` for `|ξ| ≤ 3/4` and `χ(ξ) = 0`
//! for `|ξ| ≥ 4/3`, joined by a quintic smoothstep in `log₂|ξ|`. Dyadic
//! blocks telescope, `φ_j(ξ) = χ(ξ/2^{j+1}) − χ(ξ/2^j)`, so each `φ_j` with
//! `j ≥ 0` lives in the ring `3/4·2^j ≤ |ξ| ≤ 8/3·2^j`. The top block takes
//! the remainder `1 − χ(ξ/2^{jmax})`, which makes the partition exact on
//! every stored mode, corners of the cube included.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fft::{Fft3, Spectrum};
use crate::fields::{abs_sum_sorted, FieldRef, Grid3, ScalarField};

/// Inner ring constant `a`.
pub const RING_INNER: f64 = 0.75;
/// Outer ring constant `b`.
pub const RING_OUTER: f64 = 8.0 / 3.0;
/// Where the low cutoff reaches zero.
pub const LOW_EDGE: f64 = 4.0 / 3.0;

/// Quintic smoothstep `t³(10 − 15t + 6t²)` clamped to `[0, 1]`.
#[inline]
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

/// Low-pass profile `χ(|ξ|)`.
pub fn chi(xi: f64) -> f64 {
    if xi <= RING_INNER {
        1.0
    } else if xi >= LOW_EDGE {
        0.0
    } else {
        let t = (xi / RING_INNER).log2() / (LOW_EDGE / RING_INNER).log2();
        1.0 - smoothstep(t)
    }
}

/// Precomputed multipliers `φ_j` for `j = −1..=jmax` on one grid.
#[derive(Clone, Debug)]
pub struct LPBank {
    grid: Grid3,
    jmax: i32,
    multipliers: Vec<Vec<f64>>,
    fft: Fft3,
}

impl LPBank {
    pub const JMIN: i32 = -1;

    pub fn new(grid: Grid3) -> Result<Self> {
        let jmax = Self::top_index(&grid)?;
        let multipliers = (Self::JMIN..=jmax)
            .map(|j| (0..grid.len()).map(|idx| Self::weight(j, jmax, grid.wavevector_norm(idx))).collect())
            .collect();
        Ok(Self { grid, jmax, multipliers, fft: Fft3::for_grid(&grid) })
    }

    /// Smallest `j` whose ring reaches the Nyquist wavenumber.
    fn top_index(grid: &Grid3) -> Result<i32> {
        let nyq = grid.nyquist();
        let mut j = 0;
        while RING_OUTER * f64::powi(2.0, j) < nyq {
            j += 1;
        }
        if j < 1 {
            return invalid(format!(
                "grid n={} L={} resolves wavenumbers only up to {nyq:.3}; two dyadic rings need more",
                grid.n(),
                grid.length()
            ));
        }
        Ok(j)
    }

    /// `φ_j(ξ)` for a bank whose top block is `jmax`.
    pub fn weight(j: i32, jmax: i32, xi: f64) -> f64 {
        let scaled = |p: i32| chi(xi / f64::powi(2.0, p));
        match j {
            -1 => chi(xi),
            j if j == jmax => 1.0 - scaled(j),
            j => scaled(j + 1) - scaled(j),
        }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn jmin(&self) -> i32 {
        Self::JMIN
    }

    pub fn jmax(&self) -> i32 {
        self.jmax
    }

    pub fn indices(&self) -> impl Iterator<Item = i32> {
        Self::JMIN..=self.jmax
    }

    pub fn fft(&self) -> &Fft3 {
        &self.fft
    }

    pub fn multiplier(&self, j: i32) -> Result<&[f64]> {
        self.check_index(j)?;
        Ok(&self.multipliers[(j - Self::JMIN) as usize])
    }

    fn check_index(&self, j: i32) -> Result<()> {
        if j < Self::JMIN || j > self.jmax {
            return invalid(format!("block index {j} outside {}..={}", Self::JMIN, self.jmax));
        }
        Ok(())
    }

    fn check_grid(&self, g: &Grid3) -> Result<()> {
        if *g != self.grid {
            return invalid("field grid does not match the LP bank grid");
        }
        Ok(())
    }

    /// `Δ_j` applied to a precomputed spectrum.
    pub fn block_from_spectrum(&self, spectrum: &[Complex64], j: i32) -> Result<Vec<f64>> {
        let w = self.multiplier(j)?;
        let filtered: Spectrum = spectrum.iter().zip(w).map(|(c, &m)| c * m).collect();
        Ok(self.fft.inverse_real(filtered))
    }

    /// ℓ¹ norm of the discrete convolution kernel of `Δ_j`, the operator
    /// norm of the block on `L^∞`.
    pub fn kernel_l1_norm(&self, j: i32) -> Result<f64> {
        let w = self.multiplier(j)?;
        let kernel = self.fft.inverse_real(w.iter().map(|&m| Complex64::new(m, 0.0)).collect());
        Ok(kernel.iter().map(|v| v.abs()).sum())
    }
}

pub fn build_lp_bank(grid: Grid3) -> Result<LPBank> {
    LPBank::new(grid)
}

pub fn lp_block(f: &ScalarField, bank: &LPBank, j: i32) -> Result<ScalarField> {
    bank.check_grid(f.grid())?;
    let spec = bank.fft.field_spectrum(f);
    Ok(ScalarField::from_parts_unchecked(*f.grid(), bank.block_from_spectrum(&spec, j)?))
}

/// Every block `Δ_{−1} f, …, Δ_{jmax} f` in index order.
pub fn lp_blocks(f: &ScalarField, bank: &LPBank) -> Result<Vec<ScalarField>> {
    bank.check_grid(f.grid())?;
    let spec = bank.fft.field_spectrum(f);
    bank.indices()
        .map(|j| Ok(ScalarField::from_parts_unchecked(*f.grid(), bank.block_from_spectrum(&spec, j)?)))
        .collect()
}

/// A `B^s_{∞,∞}` value with the block that attains it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BesovValue {
    pub value: f64,
    pub j_star: i32,
}

/// `sup_j 2^{js}‖Δ_j f‖_∞`, over components for vector fields.
pub fn besov_inf_inf<'a>(f: impl Into<FieldRef<'a>>, s: f64, bank: &LPBank) -> Result<BesovValue> {
    let comps: Vec<&ScalarField> = match f.into() {
        FieldRef::Scalar(a) => vec![a],
        FieldRef::Vector(u) => u.components().iter().collect(),
    };
    let sups = block_sups(&comps, bank)?;
    Ok(weighted_sup(&sups, s))
}

/// `‖Δ_j f‖_∞` for each block, maxed over the given components.
pub fn block_sups(comps: &[&ScalarField], bank: &LPBank) -> Result<Vec<(i32, f64)>> {
    for c in comps {
        bank.check_grid(c.grid())?;
    }
    let spectra: Vec<Spectrum> = comps.iter().map(|c| bank.fft.field_spectrum(c)).collect();
    bank.indices()
        .map(|j| {
            let mut sup = 0.0_f64;
            for spec in &spectra {
                let block = bank.block_from_spectrum(spec, j)?;
                sup = block.iter().fold(sup, |m, v| m.max(v.abs()));
            }
            Ok((j, sup))
        })
        .collect()
}

/// Weighted supremum `max_j 2^{js}·sup_j`; ties go to the lowest `j`.
pub fn weighted_sup(sups: &[(i32, f64)], s: f64) -> BesovValue {
    let mut best = BesovValue { value: 0.0, j_star: LPBank::JMIN };
    for &(j, sup) in sups {
        let v = f64::powi(2.0, j).powf(s) * sup;
        if v > best.value {
            best = BesovValue { value: v, j_star: j };
        }
    }
    best
}

/// Unit directions probed by the finite-difference norm: 6 axes, 12 face
/// diagonals and 8 cube diagonals.
pub fn shift_directions() -> Vec<[f64; 3]> {
    let mut dirs = Vec::with_capacity(26);
    for a in -1i32..=1 {
        for b in -1i32..=1 {
            for c in -1i32..=1 {
                if a == 0 && b == 0 && c == 0 {
                    continue;
                }
                let v = [a as f64, b as f64, c as f64];
                let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                dirs.push([v[0] / len, v[1] / len, v[2] / len]);
            }
        }
    }
    dirs
}

/// `‖Δ_h f‖_{L¹}` for a whole-cell shift `h`, first or second order. The
/// sum is order-free so periodic translates give identical bits.
fn difference_l1(f: &ScalarField, h: [i64; 3], second_order: bool) -> f64 {
    let g = f.grid();
    let n = g.n();
    let ni = n as i64;
    let data = f.data();
    let fwd: Vec<Vec<usize>> =
        h.iter().map(|&s| (0..n).map(|i| (i as i64 + s).rem_euclid(ni) as usize).collect()).collect();
    let bwd: Vec<Vec<usize>> =
        h.iter().map(|&s| (0..n).map(|i| (i as i64 - s).rem_euclid(ni) as usize).collect()).collect();
    let mut diffs = Vec::with_capacity(data.len());
    for k in 0..n {
        for j in 0..n {
            let row = g.index(0, j, k);
            let up = g.index(0, fwd[1][j], fwd[2][k]);
            let down = g.index(0, bwd[1][j], bwd[2][k]);
            for i in 0..n {
                let centre = data[row + i];
                let plus = data[up + fwd[0][i]];
                let d = if second_order { plus - 2.0 * centre + data[down + bwd[0][i]] } else { plus - centre };
                diffs.push(d);
            }
        }
    }
    abs_sum_sorted(diffs.into_iter()) * g.voxel_volume()
}

/// Number of dyadic shells below `hmax`: `log₂(n/4)`.
pub fn shift_levels(grid: &Grid3) -> usize {
    (grid.n() / 4).trailing_zeros() as usize
}

/// Finite-difference `B^ε_{1,1}` norm.
///
/// `‖f‖_{L¹} + Σ_m t_m^{−ε} ω(t_m) ln 2` over `t_m = hmax·2^{−m}`, where
/// `ω(t)` is the largest sampled `L¹` difference with `|h| ≤ t` (second
/// differences when `ε = 1`). Shifts are rounded toward zero to whole cells.
pub fn besov_11_fd(f: &ScalarField, eps: f64, hmax: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return invalid(format!("smoothness {eps} outside (0, 1]"));
    }
    let g = f.grid();
    if !(hmax > 0.0 && hmax <= 0.25 * g.length() * (1.0 + 1e-12)) {
        return invalid(format!("largest shift {hmax} outside (0, L/4]"));
    }
    let second = eps == 1.0;
    let dirs = shift_directions();
    let levels = shift_levels(g);
    let dx = g.spacing();

    let shells: Vec<f64> = (0..=levels)
        .map(|m| {
            let t = hmax * 0.5f64.powi(m as i32);
            let per_dir: Vec<f64> = dirs
                .par_iter()
                .map(|d| {
                    let h = d.map(|c| (t * c / dx + 1e-9 * c.signum()).trunc() as i64);
                    if h == [0, 0, 0] {
                        0.0
                    } else {
                        difference_l1(f, h, second)
                    }
                })
                .collect();
            per_dir.into_iter().fold(0.0, f64::max)
        })
        .collect();

    // ω(t_m) covers every shell at or below t_m
    let mut omega = vec![0.0; shells.len()];
    let mut running = 0.0_f64;
    for m in (0..shells.len()).rev() {
        running = running.max(shells[m]);
        omega[m] = running;
    }
    let tail: f64 = omega
        .iter()
        .enumerate()
        .map(|(m, w)| (hmax * 0.5f64.powi(m as i32)).powf(-eps) * w * std::f64::consts::LN_2)
        .sum();
    Ok(f.l1_norm() + tail)
}

/// Default largest shift, a quarter of the box.
pub fn default_hmax(grid: &Grid3) -> f64 {
    0.25 * grid.length()
}

/// `|∫ u f| / ‖f‖_{B^ε_{1,1}}`, the duality lower bound on `‖u‖_{B^{−ε}_{∞,∞}}`
/// up to the duality constant.
pub fn dual_lower_bound(u: &ScalarField, f: &ScalarField, eps: f64) -> Result<f64> {
    let pairing = u.pairing(f)?;
    let norm = besov_11_fd(f, eps, default_hmax(f.grid()))?;
    if norm == 0.0 {
        return Err(Error::DegenerateTestFunction);
    }
    Ok(pairing.abs() / norm)
}
