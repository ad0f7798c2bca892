//! The "dome with a lightning rod": a radial profile through
//! `(0, 2), (1/n, 1), (1, 1), (2, 0), (∞, 0)` whose interior corners are
//! rounded. Its `3/4` super-level set is a tiny ball, sparse at scale
//! `2/n`, while its `B^{−1}_{∞,∞}` norm stays of order one.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::fields::{scalar_superlevel, Grid3, ScalarField, Sign};
use crate::lp::{besov_11_fd, default_hmax, smoothstep};
use crate::sparse::{mixed, semi_mixed};

/// Exact sup of the profile, attained at the tip.
pub const DOME_SUP: f64 = 2.0;
/// Level of the super-level set, as a fraction of the sup.
pub const DOME_LEVEL: f64 = 0.75;
/// Ratio the level set is tested against.
pub const DOME_DELTA: f64 = 0.2;

/// Rounded corner at `v`: slopes `left → right` blended over `[v−w, v+w]`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Corner {
    v: f64,
    w: f64,
    left: f64,
    right: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomeProfile {
    n_rod: usize,
    corners: [Corner; 3],
}

impl DomeProfile {
    pub fn new(n_rod: usize) -> Result<Self> {
        if n_rod < 4 {
            return invalid(format!("rod parameter {n_rod} must be at least 4"));
        }
        let a = 1.0 / n_rod as f64;
        // half-width is 5% of the shorter neighbouring segment
        let corners = [
            Corner { v: a, w: 0.05 * a.min(1.0 - a), left: -(n_rod as f64), right: 0.0 },
            Corner { v: 1.0, w: 0.05 * (1.0 - a).min(1.0), left: 0.0, right: -1.0 },
            Corner { v: 2.0, w: 0.05, left: -1.0, right: 0.0 },
        ];
        Ok(Self { n_rod, corners })
    }

    pub fn n_rod(&self) -> usize {
        self.n_rod
    }

    /// The unsmoothed polygon.
    pub fn polygon(&self, rho: f64) -> f64 {
        let a = 1.0 / self.n_rod as f64;
        if rho <= a {
            2.0 - rho / a
        } else if rho <= 1.0 {
            1.0
        } else if rho <= 2.0 {
            2.0 - rho
        } else {
            0.0
        }
    }

    pub fn value(&self, rho: f64) -> f64 {
        let rho = rho.max(0.0);
        for c in &self.corners {
            if (rho - c.v).abs() < c.w {
                let tau = (rho - c.v + c.w) / (2.0 * c.w);
                let blend = tau.powi(4) * (2.5 + tau * (-3.0 + tau));
                return self.polygon(c.v - c.w) + c.left * (rho - c.v + c.w) + (c.right - c.left) * 2.0 * c.w * blend;
            }
        }
        self.polygon(rho)
    }

    /// Slope of the smoothed profile.
    pub fn slope(&self, rho: f64) -> f64 {
        for c in &self.corners {
            if (rho - c.v).abs() < c.w {
                return c.left + (c.right - c.left) * smoothstep((rho - c.v + c.w) / (2.0 * c.w));
            }
        }
        let a = 1.0 / self.n_rod as f64;
        if rho < a {
            -(self.n_rod as f64)
        } else if rho < 1.0 {
            0.0
        } else if rho < 2.0 {
            -1.0
        } else {
            0.0
        }
    }

    /// Radius beyond which the profile vanishes.
    pub fn support(&self) -> f64 {
        2.0 + self.corners[2].w
    }
}

/// Samples the dome centred at the box origin, without resolution checks.
pub fn sample_dome(n_rod: usize, grid: &Grid3) -> Result<ScalarField> {
    let p = DomeProfile::new(n_rod)?;
    ScalarField::from_fn(*grid, |x| p.value((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()))
}

/// Grid size needed to put four cells across the rod.
pub fn required_resolution(n_rod: usize, length: f64) -> usize {
    ((4.0 * n_rod as f64 * length).ceil() as usize).next_power_of_two()
}

/// The dome on a grid that resolves the rod radius `1/n_rod` with at least
/// four cells.
pub fn build_dome_lightning_rod(n_rod: usize, grid: &Grid3) -> Result<ScalarField> {
    if n_rod < 4 {
        return invalid(format!("rod parameter {n_rod} must be at least 4"));
    }
    if grid.spacing() > 0.25 / n_rod as f64 {
        return invalid(format!(
            "cell size {} does not resolve the rod 1/{n_rod}; need n >= {} at L = {}",
            grid.spacing(),
            required_resolution(n_rod, grid.length()),
            grid.length()
        ));
    }
    sample_dome(n_rod, grid)
}

/// Box used for the level-set test: side `8/n_rod`, so the scale `2/n_rod`
/// is a quarter of it.
pub fn zoom_grid(n_rod: usize, n: usize) -> Result<Grid3> {
    Grid3::new(n, 8.0 / n_rod as f64)
}

pub const DEFAULT_ZOOM_N: usize = 64;

/// Box for the norm computations: wide enough that the dome's support fits
/// in a quarter of it.
pub fn default_host_grid() -> Grid3 {
    Grid3::new(64, 10.0).expect("fixed host grid is valid")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterexampleRow {
    pub n: usize,
    pub r: f64,
    /// `r·‖f‖∞ = 4/n`.
    pub r_linf: f64,
    pub l2_squared: f64,
    pub besov_11: f64,
    /// `‖f‖₂²/‖f‖_{B¹_{1,1}}`, testing `f` against itself.
    pub besov_lower_bound: f64,
    pub ratio: f64,
    /// Largest ball fraction of `{f > 3/2}` at scale `2/n`.
    pub set_ratio: f64,
    pub complement_ratio: f64,
    pub set_semi_mixed: bool,
    pub mixed: bool,
    pub delta: f64,
}

/// One row per rod parameter. Norms come from `host`; the level set is
/// measured on a zoom box of side `8/n` with `zoom_n` cells per side.
pub fn counterexample_report(n_list: &[usize], host: &Grid3, zoom_n: usize) -> Result<Vec<CounterexampleRow>> {
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let p = DomeProfile::new(n)?;
        if p.support() > 0.25 * host.length() {
            return invalid(format!("dome support {} exceeds L/4 on the host grid", p.support()));
        }
        let f = sample_dome(n, host)?;
        let l2_squared = f.pairing(&f)?;
        let besov_11 = besov_11_fd(&f, 1.0, default_hmax(host))?;
        let besov_lower_bound = l2_squared / besov_11;
        let r = 2.0 / n as f64;
        let r_linf = r * DOME_SUP;

        let zoom = zoom_grid(n, zoom_n)?;
        let fz = build_dome_lightning_rod(n, &zoom)?;
        let set = scalar_superlevel(&fz, Sign::Plus, DOME_LEVEL * DOME_SUP)?;
        let m = mixed(&set, r, DOME_DELTA)?;
        rows.push(CounterexampleRow {
            n,
            r,
            r_linf,
            l2_squared,
            besov_11,
            besov_lower_bound,
            ratio: besov_lower_bound / r_linf,
            set_ratio: m.set.ratio,
            complement_ratio: m.complement.ratio,
            set_semi_mixed: m.set.pass,
            mixed: m.pass,
            delta: DOME_DELTA,
        });
    }
    Ok(rows)
}

/// Semi-mixed fraction of the dome's level set alone.
pub fn dome_set_fraction(n_rod: usize, zoom_n: usize) -> Result<f64> {
    let zoom = zoom_grid(n_rod, zoom_n)?;
    let f = build_dome_lightning_rod(n_rod, &zoom)?;
    let set = scalar_superlevel(&f, Sign::Plus, DOME_LEVEL * DOME_SUP)?;
    Ok(semi_mixed(&set, 2.0 / n_rod as f64, DOME_DELTA)?.ratio)
}
