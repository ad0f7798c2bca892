//! Pseudo-spectral incompressible Navier–Stokes on the periodic box, and a
//! monitor for the regularity-criterion quantities.
//!
//! The velocity is stored as three dealiased, divergence-free spectra.
//! Pressure never appears: the nonlinear term `u × ω` is Leray-projected.
//! Time stepping is classical RK4 on `v = e^{−νt|ξ|²}û`, so the viscous
//! part is integrated exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::{dealias_spectrum, is_retained, Fft3, Spectrum};
use crate::fields::{all_component_superlevels, Grid3, ScalarField, VectorField};
use crate::lp::{besov_inf_inf, LPBank};
use crate::sparse::semi_mixed;

/// Level of the monitored super-level sets.
pub const MONITOR_LAMBDA: f64 = 0.5;
/// Ratio the monitored sets are tested against.
pub const MONITOR_DELTA: f64 = 0.75;
/// Quadrature slack allowed when checking that smallness implies sparsity.
pub const CONSISTENCY_SLACK: f64 = 0.02;

/// `h = (2/π)·asin((1 − (3/4)^{2/3})/(1 + (3/4)^{2/3}))`.
pub fn compute_h() -> f64 {
    let a = 0.75f64.powf(2.0 / 3.0);
    2.0 / std::f64::consts::PI * ((1.0 - a) / (1.0 + a)).asin()
}

/// Root of `h/2 + (1 − h)M = 1`.
pub fn compute_m() -> f64 {
    let h = compute_h();
    (1.0 - 0.5 * h) / (1.0 - h)
}

pub type VelocitySpectrum = [Spectrum; 3];

/// `û ← û − ξ(ξ·û)/|ξ|²` on every nonzero mode.
///
/// A second pass removes the cancellation residue left when `û` is nearly a
/// pure gradient.
pub fn leray_project(grid: &Grid3, u_hat: &mut VelocitySpectrum) {
    let xi = wavevectors(grid);
    project_with(&xi, u_hat);
}

fn project_with(xi: &[[f64; 3]], u_hat: &mut VelocitySpectrum) {
    let [a, b, c] = u_hat;
    a.par_iter_mut().zip(b.par_iter_mut()).zip(c.par_iter_mut()).zip(xi.par_iter()).for_each(|(((x, y), z), xi)| {
        let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        if k2 == 0.0 {
            return;
        }
        for _ in 0..2 {
            let dot = (*x * xi[0] + *y * xi[1] + *z * xi[2]) / k2;
            *x -= dot * xi[0];
            *y -= dot * xi[1];
            *z -= dot * xi[2];
        }
    });
}

fn wavevectors(grid: &Grid3) -> Vec<[f64; 3]> {
    (0..grid.len()).into_par_iter().map(|idx| wavevector(grid, idx)).collect()
}

#[inline]
fn wavevector(grid: &Grid3, idx: usize) -> [f64; 3] {
    let (i, j, k) = grid.unravel(idx);
    [grid.wavenumber(i), grid.wavenumber(j), grid.wavenumber(k)]
}

/// Largest `|ξ·û(ξ)|/|û(ξ)|` over modes with nonzero coefficients.
pub fn divergence_residual(grid: &Grid3, u_hat: &VelocitySpectrum) -> f64 {
    (0..grid.len())
        .map(|idx| {
            let xi = wavevector(grid, idx);
            let v = [u_hat[0][idx], u_hat[1][idx], u_hat[2][idx]];
            let mag = (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt();
            if mag == 0.0 {
                0.0
            } else {
                (v[0] * xi[0] + v[1] * xi[1] + v[2] * xi[2]).norm() / mag
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct NseState {
    grid: Grid3,
    u_hat: VelocitySpectrum,
    t: f64,
    nu: f64,
    fft: Fft3,
    xi: Vec<[f64; 3]>,
    retained: Vec<bool>,
}

impl NseState {
    /// Transforms, dealiases and projects `u`.
    pub fn from_velocity(u: &VectorField, nu: f64) -> Result<Self> {
        if !(nu >= 0.0 && nu.is_finite()) {
            return invalid(format!("viscosity {nu} must be nonnegative"));
        }
        let grid = *u.grid();
        let fft = Fft3::for_grid(&grid);
        let mut u_hat = u.components().clone().map(|c| fft.field_spectrum(&c));
        for s in u_hat.iter_mut() {
            dealias_spectrum(&grid, s);
        }
        let xi = wavevectors(&grid);
        let retained = (0..grid.len()).map(|idx| is_retained(&grid, idx)).collect();
        project_with(&xi, &mut u_hat);
        Ok(Self { grid, u_hat, t: 0.0, nu, fft, xi, retained })
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn viscosity(&self) -> f64 {
        self.nu
    }

    pub fn spectrum(&self) -> &VelocitySpectrum {
        &self.u_hat
    }

    pub fn velocity(&self) -> VectorField {
        let (a, b) = self.fft.inverse_real_pair(&self.u_hat[0], &self.u_hat[1]);
        let c = self.fft.inverse_real(self.u_hat[2].clone());
        let comps = [a, b, c].map(|d| ScalarField::from_parts_unchecked(self.grid, d));
        VectorField::new(comps).expect("components share the grid")
    }

    pub fn linf_norm(&self) -> f64 {
        self.velocity().linf_norm()
    }

    /// `∫|u|²` by Parseval.
    pub fn energy(&self) -> f64 {
        let n3 = self.grid.len() as f64;
        let sum: f64 = self.u_hat.iter().flat_map(|s| s.iter()).map(|c| c.norm_sqr()).sum();
        sum * self.grid.voxel_volume() / n3
    }

    pub fn divergence_residual(&self) -> f64 {
        divergence_residual(&self.grid, &self.u_hat)
    }

    /// Largest step allowed by the advective and viscous limits.
    pub fn max_dt(&self) -> f64 {
        let dx = self.grid.spacing();
        let adv = 0.5 * dx / self.linf_norm().max(1.0);
        if self.nu > 0.0 {
            adv.min(0.5 * dx * dx / self.nu)
        } else {
            adv
        }
    }

    /// `P(u × ω)`, dealiased.
    fn nonlinear(&self, u_hat: &VelocitySpectrum) -> VelocitySpectrum {
        let mut w: VelocitySpectrum = [0usize, 1, 2].map(|_| Vec::with_capacity(self.xi.len()));
        for (idx, xi) in self.xi.iter().enumerate() {
            let (a, b, c) = (u_hat[0][idx], u_hat[1][idx], u_hat[2][idx]);
            w[0].push(Complex64::i() * (b * -xi[2] + c * xi[1]));
            w[1].push(Complex64::i() * (c * -xi[0] + a * xi[2]));
            w[2].push(Complex64::i() * (a * -xi[1] + b * xi[0]));
        }
        let (u0, u1) = self.fft.inverse_real_pair(&u_hat[0], &u_hat[1]);
        let (u2, w0) = self.fft.inverse_real_pair(&u_hat[2], &w[0]);
        let (w1, w2) = self.fft.inverse_real_pair(&w[1], &w[2]);
        let (u, w) = ([u0, u1, u2], [w0, w1, w2]);
        let cross = |c: usize| -> Vec<f64> {
            let (p, q) = ((c + 1) % 3, (c + 2) % 3);
            (0..u[0].len()).into_par_iter().map(|i| u[p][i] * w[q][i] - u[q][i] * w[p][i]).collect()
        };
        let (a, b) = self.fft.forward_real_pair(&cross(0), &cross(1));
        let c = self.fft.forward_real(&cross(2));
        let mut out = [a, b, c];
        for s in out.iter_mut() {
            s.par_iter_mut().zip(self.retained.par_iter()).for_each(|(v, &keep)| {
                if !keep {
                    *v = Complex64::default();
                }
            });
        }
        project_with(&self.xi, &mut out);
        out
    }

    /// One integrating-factor RK4 step.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let dt_max = self.max_dt();
        if !(dt > 0.0) || dt > dt_max * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, dt_max });
        }
        self.advance(dt);
        Ok(())
    }

    fn advance(&mut self, dt: f64) {
        // e1 = e^{−ν|ξ|²dt/2}, e2 = e1²
        let e1: Vec<f64> = self
            .xi
            .par_iter()
            .map(|xi| (-self.nu * (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]) * 0.5 * dt).exp())
            .collect();
        let e2: Vec<f64> = e1.iter().map(|e| e * e).collect();
        let comb = |f: &(dyn Fn(usize, usize) -> Complex64 + Sync)| -> VelocitySpectrum {
            [0usize, 1, 2].map(|c| (0..e1.len()).into_par_iter().map(|i| f(c, i)).collect())
        };
        let u0 = &self.u_hat;
        let k1 = self.nonlinear(u0);
        let u2 = comb(&|c, i| (u0[c][i] + k1[c][i] * (0.5 * dt)) * e1[i]);
        let k2 = self.nonlinear(&u2);
        let u3 = comb(&|c, i| u0[c][i] * e1[i] + k2[c][i] * (0.5 * dt));
        let k3 = self.nonlinear(&u3);
        let u4 = comb(&|c, i| u0[c][i] * e2[i] + k3[c][i] * (dt * e1[i]));
        let k4 = self.nonlinear(&u4);
        let mut next = comb(&|c, i| {
            if !self.retained[i] {
                return Complex64::default();
            }
            (u0[c][i] + k1[c][i] * (dt / 6.0)) * e2[i]
                + (k2[c][i] + k3[c][i]) * (dt / 3.0 * e1[i])
                + k4[c][i] * (dt / 6.0)
        });
        project_with(&self.xi, &mut next);
        self.u_hat = next;
        self.t += dt;
    }
}

/// Named initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Preset {
    Zero,
    /// `(sin x₂, 0, 0)`.
    Shear,
    TaylorGreen,
    /// Random divergence-free field with modes `|k| ≤ kmax`, scaled to the
    /// given sup norm.
    RandomBand {
        seed: u64,
        kmax: u32,
        amplitude: f64,
    },
}

impl Preset {
    pub fn velocity(&self, grid: &Grid3) -> Result<VectorField> {
        match self {
            Preset::Zero => Ok(VectorField::zeros(*grid)),
            Preset::Shear => VectorField::from_fn(*grid, |x| [x[1].sin(), 0.0, 0.0]),
            Preset::TaylorGreen => VectorField::from_fn(*grid, |x| {
                [x[0].sin() * x[1].cos() * x[2].cos(), -x[0].cos() * x[1].sin() * x[2].cos(), 0.0]
            }),
            Preset::RandomBand { seed, kmax, amplitude } => random_band(grid, *seed, *kmax, *amplitude),
        }
    }
}

fn random_band(grid: &Grid3, seed: u64, kmax: u32, amplitude: f64) -> Result<VectorField> {
    if kmax == 0 || kmax as usize > grid.n() / 3 {
        return invalid(format!("band limit {kmax} must lie in 1..={}", grid.n() / 3));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k0 = std::f64::consts::TAU / grid.length();
    let km = kmax as i32;
    let modes: Vec<([f64; 3], [f64; 3], f64)> = (0..24)
        .map(|_| {
            let k = loop {
                let k = [rng.gen_range(-km..=km), rng.gen_range(-km..=km), rng.gen_range(-km..=km)];
                let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                if k2 > 0 && k2 <= km * km {
                    break k.map(|v| v as f64 * k0);
                }
            };
            let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            (k, a, rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let raw = VectorField::from_fn(*grid, |x| {
        let mut v = [0.0; 3];
        for (k, a, phase) in &modes {
            let c = (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + phase).cos();
            v.iter_mut().zip(a).for_each(|(o, ai)| *o += ai * c);
        }
        v
    })?;
    let projected = NseState::from_velocity(&raw, 0.0)?.velocity();
    let sup = projected.linf_norm();
    if sup == 0.0 {
        return Ok(projected);
    }
    Ok(projected.scaled(amplitude / sup))
}

/// Constants of the criterion; `C(M)` and `C̃(M)` are inputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorConstants {
    pub m: f64,
    pub c_m: f64,
    pub ctilde_m: f64,
    pub c_star: f64,
    pub m0: f64,
}

impl MonitorConstants {
    pub fn new(c_m: f64, ctilde_m: f64, c_star: f64) -> Result<Self> {
        for (name, v) in [("C(M)", c_m), ("C~(M)", ctilde_m), ("c*", c_star)] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} = {v} must be positive"));
            }
        }
        Ok(Self { m: compute_m(), c_m, ctilde_m, c_star, m0: c_star / (2.0 * c_m * ctilde_m) })
    }

    /// `1/(2 C C̃ ‖u‖∞)`.
    pub fn criterion_scale(&self, linf: f64) -> f64 {
        1.0 / (2.0 * self.c_m * self.ctilde_m * linf)
    }

    /// `c*²/(4C²C̃²)·‖u‖∞/‖u‖_{B⁰}`.
    pub fn nonsmallness_bound(&self, linf: f64, besov_0: f64) -> f64 {
        let cc = self.c_m * self.ctilde_m;
        self.c_star * self.c_star / (4.0 * cc * cc) * linf / besov_0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub linf: f64,
    pub besov_m1: f64,
    pub besov_0: f64,
    /// Criterion scale, before clamping.
    pub r: f64,
    /// Semi-mixed fractions of `A^{1+}, A^{1−}, A^{2+}, A^{2−}, A^{3+}, A^{3−}`.
    pub fractions: [f64; 6],
    pub smallness: bool,
    pub nonsmallness: bool,
    pub sparsity: bool,
    /// The fractions were measured at a scale other than `r` because `r`
    /// left `[h/2, L/4]`.
    pub scale_clamped: bool,
}

impl MonitorRecord {
    /// Smallness should force every fraction below `3/4 + slack`.
    pub fn is_consistent(&self) -> bool {
        !self.smallness || self.fractions.iter().all(|&f| f <= MONITOR_DELTA + CONSISTENCY_SLACK)
    }

    pub fn recompute_flags(&self, consts: &MonitorConstants) -> (bool, bool, bool) {
        (
            self.besov_m1 <= consts.m0,
            self.besov_m1 <= consts.nonsmallness_bound(self.linf, self.besov_0),
            self.fractions.iter().all(|&f| f <= MONITOR_DELTA),
        )
    }
}

fn subtract_means(u: &VectorField) -> VectorField {
    let comps = u.components().clone().map(|c| {
        let mean = c.data().iter().sum::<f64>() / c.data().len() as f64;
        let data = c.data().iter().map(|v| v - mean).collect();
        ScalarField::from_parts_unchecked(*c.grid(), data)
    });
    VectorField::new(comps).expect("components share the grid")
}

/// Criterion quantities for one velocity field; `None` when `u ≡ 0`.
pub fn monitor_snapshot(
    u: &VectorField,
    t: f64,
    consts: &MonitorConstants,
    bank: &LPBank,
    subtract_mean: bool,
) -> Result<Option<MonitorRecord>> {
    let linf = u.linf_norm();
    if linf == 0.0 {
        return Ok(None);
    }
    let g = u.grid();
    let centred;
    let for_norms = if subtract_mean {
        centred = subtract_means(u);
        &centred
    } else {
        u
    };
    let besov_m1 = besov_inf_inf(for_norms, -1.0, bank)?.value;
    let besov_0 = besov_inf_inf(for_norms, 0.0, bank)?.value;
    let r = consts.criterion_scale(linf);
    let used = r.clamp(0.5 * g.spacing(), 0.25 * g.length());
    let scale_clamped = used != r;
    let mut fractions = [0.0; 6];
    for (slot, set) in fractions.iter_mut().zip(all_component_superlevels(u, MONITOR_LAMBDA)?) {
        *slot = semi_mixed(&set, used, MONITOR_DELTA)?.ratio;
    }
    let mut rec = MonitorRecord {
        t,
        linf,
        besov_m1,
        besov_0,
        r,
        fractions,
        smallness: false,
        nonsmallness: false,
        sparsity: false,
        scale_clamped,
    };
    (rec.smallness, rec.nonsmallness, rec.sparsity) = rec.recompute_flags(consts);
    Ok(Some(rec))
}

/// Indices `k` with `x[k] < x[j]` for every later `j`; the last sample never
/// qualifies.
pub fn escape_indices(linf: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut later_min = f64::INFINITY;
    for k in (0..linf.len()).rev() {
        if k + 1 < linf.len() && linf[k] < later_min {
            out.push(k);
        }
        later_min = later_min.min(linf[k]);
    }
    out.reverse();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EscapeTime {
    pub index: usize,
    pub t: f64,
    pub linf: f64,
    /// `[t + 1/(4C²‖u‖²), t + 1/(C²‖u‖²)]`.
    pub window: (f64, f64),
    /// Records whose time falls inside the window.
    pub records_in_window: Vec<usize>,
}

pub fn find_escape_times(records: &[MonitorRecord], consts: &MonitorConstants) -> Vec<EscapeTime> {
    let linf: Vec<f64> = records.iter().map(|r| r.linf).collect();
    escape_indices(&linf)
        .into_iter()
        .map(|k| {
            let rec = &records[k];
            let c2 = consts.c_m * consts.c_m * rec.linf * rec.linf;
            let window = (rec.t + 1.0 / (4.0 * c2), rec.t + 1.0 / c2);
            let records_in_window = records
                .iter()
                .enumerate()
                .filter(|(_, r)| r.t >= window.0 && r.t <= window.1)
                .map(|(i, _)| i)
                .collect();
            EscapeTime { index: k, t: rec.t, linf: rec.linf, window, records_in_window }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Monitor every `cadence` steps (and at the end).
    pub cadence: usize,
    pub subtract_mean: bool,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<MonitorRecord>,
    pub steps: usize,
    pub final_state: NseState,
    /// Largest divergence residual seen after any step.
    pub max_divergence: f64,
    /// Energy after each step, starting with the initial value.
    pub energies: Vec<f64>,
    /// Records where smallness held but some fraction exceeded the slack.
    pub incidents: Vec<usize>,
}

/// Advances `u0` to `t_end`, calling `observe` after every step.
pub fn simulate(
    u0: &VectorField,
    params: &SimulationParams,
    consts: &MonitorConstants,
    mut observe: impl FnMut(usize, &NseState) -> Result<()>,
) -> Result<Trajectory> {
    if !(params.t_end >= 0.0 && params.dt > 0.0) {
        return invalid(format!("need t_end >= 0 and dt > 0, got {} and {}", params.t_end, params.dt));
    }
    if params.cadence == 0 {
        return invalid("monitor cadence must be at least 1");
    }
    let mut state = NseState::from_velocity(u0, params.nu)?;
    let bank = LPBank::new(*state.grid())?;
    let steps = (params.t_end / params.dt - 1e-9).ceil().max(0.0) as usize;
    let mut records = Vec::new();
    let mut energies = vec![state.energy()];
    let mut max_divergence = state.divergence_residual();
    let record = |state: &NseState, records: &mut Vec<MonitorRecord>| -> Result<()> {
        if let Some(r) = monitor_snapshot(&state.velocity(), state.time(), consts, &bank, params.subtract_mean)? {
            records.push(r);
        }
        Ok(())
    };
    record(&state, &mut records)?;
    observe(0, &state)?;
    for s in 1..=steps {
        let dt = if s == steps { params.t_end - (s - 1) as f64 * params.dt } else { params.dt };
        if s == steps && dt <= 0.0 {
            break;
        }
        state.step(dt)?;
        // step times without accumulated rounding, the last one exactly t_end
        state.t = if s == steps { params.t_end } else { s as f64 * params.dt };
        energies.push(state.energy());
        max_divergence = max_divergence.max(state.divergence_residual());
        if s % params.cadence == 0 || s == steps {
            record(&state, &mut records)?;
        }
        observe(s, &state)?;
    }
    let incidents = records.iter().enumerate().filter(|(_, r)| !r.is_consistent()).map(|(i, _)| i).collect();
    Ok(Trajectory { records, steps, final_state: state, max_divergence, energies, incidents })
}
