//! Mollified logarithm `f_ε = ρ_ε ∗ log⁺(1/|x|)`.
//!
//! `‖f_ε‖∞` grows like `log(1/ε)` while `‖f_ε‖_{B⁰_{∞,∞}}` stays bounded.
//! Small `ε` is out of reach of a single 64³ box that also holds the unit
//! support, so the norms are taken from the exact radial profile sampled
//! on a stack of boxes that halve in size around the origin.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::fft::Fft3;
use crate::fields::{Grid3, ScalarField};
use crate::lp::{smoothstep, LPBank};

/// Unnormalised standard bump `exp(−1/(1−q²))` on `|q| < 1`.
pub fn bump(q: f64) -> f64 {
    if q.abs() < 1.0 {
        (-1.0 / (1.0 - q * q)).exp()
    } else {
        0.0
    }
}

pub fn log_plus(t: f64) -> f64 {
    if t < 1.0 {
        -t.ln()
    } else {
        0.0
    }
}

/// Samples `log⁺(1/|x|)` and convolves it in Fourier space with the sampled
/// bump of radius `eps`, normalised to unit mass on the grid.
pub fn build_mollified_log(eps: f64, grid: &Grid3) -> Result<ScalarField> {
    let dx = grid.spacing();
    if !(eps >= 4.0 * dx) {
        return invalid(format!("mollifier radius {eps} spans fewer than 4 cells of size {dx}"));
    }
    if 1.0 + eps > 0.25 * grid.length() {
        return invalid(format!("support 1 + {eps} exceeds L/4 = {}", 0.25 * grid.length()));
    }
    let fft = Fft3::for_grid(grid);
    let samples: Vec<f64> = (0..grid.len())
        .map(|idx| {
            let x = grid.center(idx);
            log_plus((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())
        })
        .collect();
    let mut kernel: Vec<f64> = (0..grid.len())
        .map(|idx| {
            let (i, j, k) = grid.unravel(idx);
            let o = [grid.signed_mode(i), grid.signed_mode(j), grid.signed_mode(k)].map(|m| m as f64 * dx);
            bump((o[0] * o[0] + o[1] * o[1] + o[2] * o[2]).sqrt() / eps)
        })
        .collect();
    let mass: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|v| *v /= mass);
    let mut spec = fft.forward_real(&samples);
    spec.iter_mut().zip(fft.forward_real(&kernel)).for_each(|(a, b)| *a *= b);
    ScalarField::new(*grid, fft.inverse_real(spec))
}

/// `∫ t log⁺(1/t) dt` from 0, constant past `t = 1`.
fn log_moment(t: f64) -> f64 {
    let t = t.min(1.0);
    if t <= 0.0 {
        0.0
    } else {
        0.5 * t * t * (-t.ln()) + 0.25 * t * t
    }
}

/// Mean of `log⁺(1/|y|)` over the sphere of radius `q` around a point at
/// distance `s` from the origin.
fn sphere_mean(s: f64, q: f64) -> f64 {
    if s < 1e-9 * q {
        return log_plus(q);
    }
    if q < 1e-9 * s {
        return log_plus(s);
    }
    (log_moment(s + q) - log_moment((s - q).abs())) / (2.0 * s * q)
}

/// The radial profile `s ↦ f_ε(s)`, integrated exactly in angle and by
/// Gauss–Legendre quadrature in the mollifier radius.
pub struct MollifiedLogProfile {
    eps: f64,
    mass: f64,
    rule: GaussLegendre,
}

impl MollifiedLogProfile {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return invalid(format!("mollifier radius {eps} outside (0, 1)"));
        }
        let rule = GaussLegendre::new(NonZeroUsize::new(48).unwrap());
        let mass = 4.0 * PI * rule.integrate(0.0, 1.0, |p| bump(p) * p * p);
        Ok(Self { eps, mass, rule })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn value(&self, s: f64) -> f64 {
        let e = self.eps;
        if s >= 1.0 + e {
            return 0.0;
        }
        // kinks of the integrand in p
        let mut cuts = vec![0.0, 1.0];
        for c in [s / e, (1.0 - s) / e, (s - 1.0) / e, (1.0 + s) / e] {
            if c > 0.0 && c < 1.0 {
                cuts.push(c);
            }
        }
        cuts.sort_by(f64::total_cmp);
        let integrand = |p: f64| bump(p) * p * p * sphere_mean(s, e * p);
        let total: f64 = cuts.windows(2).map(|w| self.rule.integrate(w[0], w[1], integrand)).sum();
        4.0 * PI * total / self.mass
    }
}

/// Norms of one mollified logarithm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MollifiedLogRow {
    pub eps: f64,
    pub linf: f64,
    pub besov0: f64,
    pub ratio: f64,
    pub j_star: i32,
    pub levels: usize,
}

/// Side of the coarsest box; holds the support `1 + ε` within `L/4`.
pub const OUTER_BOX: f64 = 4.5;
pub const NESTED_N: usize = 64;
const MAX_LEVELS: usize = 16;

/// Sup norm and `B⁰_{∞,∞}` norm of `amplitude·f_ε` from nested boxes.
///
/// Box `ℓ` has side `4.5/2^ℓ` and 64 cells per side; boxes are added until
/// the cell size is at most `ε/4`. Inner boxes taper the field to zero
/// between `L/4` and `0.45L`, keep only samples with `|x| ≤ L/8` and only
/// blocks with `2^j ≥ 32/L`, whose kernels are short compared with `L/8`.
/// The remainder block counts only on the finest box. Each block is read
/// from the finest box that admits it.
pub fn mollified_log_norms(eps: f64, amplitude: f64) -> Result<MollifiedLogRow> {
    let profile = MollifiedLogProfile::new(eps)?;
    let n = NESTED_N;
    let mut sups: HashMap<i32, f64> = HashMap::new();
    let mut linf = 0.0_f64;
    let mut level = 0;
    loop {
        if level >= MAX_LEVELS {
            return invalid(format!("mollifier radius {eps} needs more than {MAX_LEVELS} nested boxes"));
        }
        let length = OUTER_BOX / f64::powi(2.0, level as i32);
        let grid = Grid3::new(n, length)?;
        let finest = grid.spacing() <= 0.25 * eps;
        let field = sample_radial(&grid, &profile, amplitude, level > 0);
        linf = field.iter().fold(linf, |m, v| m.max(v.abs()));

        let bank = LPBank::new(grid)?;
        let spec = bank.fft().forward_real(&field);
        let trusted: Vec<usize> = if level == 0 {
            (0..grid.len()).collect()
        } else {
            (0..grid.len()).filter(|&idx| norm(grid.center(idx)) <= 0.125 * length).collect()
        };
        for j in bank.indices() {
            if level > 0 && f64::powi(2.0, j) < 32.0 / length {
                continue;
            }
            if j == bank.jmax() && !finest {
                continue;
            }
            let block = bank.block_from_spectrum(&spec, j)?;
            let sup = trusted.iter().fold(0.0_f64, |m, &idx| m.max(block[idx].abs()));
            sups.insert(j, sup);
        }
        level += 1;
        if finest {
            break;
        }
    }
    let mut js: Vec<i32> = sups.keys().copied().collect();
    js.sort_unstable();
    let (mut besov0, mut j_star) = (0.0, LPBank::JMIN);
    for j in js {
        if sups[&j] > besov0 {
            besov0 = sups[&j];
            j_star = j;
        }
    }
    let ratio = if besov0 > 0.0 { linf / besov0 } else { 0.0 };
    Ok(MollifiedLogRow { eps, linf, besov0, ratio, j_star, levels: level })
}

fn norm(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Samples the profile at cell centres. Centres sit at odd multiples of
/// `h/2`, so `|x|` depends only on a sum of odd squares, which is cached.
fn sample_radial(grid: &Grid3, profile: &MollifiedLogProfile, amplitude: f64, taper: bool) -> Vec<f64> {
    let n = grid.n() as i64;
    let half = 0.5 * grid.spacing();
    let length = grid.length();
    let mut cache: HashMap<i64, f64> = HashMap::new();
    (0..grid.len())
        .map(|idx| {
            let (i, j, k) = grid.unravel(idx);
            let odd = |m: usize| 2 * m as i64 + 1 - n;
            let key = odd(i).pow(2) + odd(j).pow(2) + odd(k).pow(2);
            *cache.entry(key).or_insert_with(|| {
                let rho = half * (key as f64).sqrt();
                let w = if taper { 1.0 - smoothstep((rho - 0.25 * length) / (0.2 * length)) } else { 1.0 };
                amplitude * w * profile.value(rho)
            })
        })
        .collect()
}

/// Rows sorted by `ε` descending.
pub fn mollified_log_report(eps_list: &[f64]) -> Result<Vec<MollifiedLogRow>> {
    let mut eps: Vec<f64> = eps_list.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.iter().map(|&e| mollified_log_norms(e, 1.0)).collect()
}
