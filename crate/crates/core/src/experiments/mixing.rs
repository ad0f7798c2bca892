//! The mixing lemma: its constants, the cutoff test function, calibration
//! of the duality constant and verdicts on concrete fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{all_component_superlevels, component_superlevel, Grid3, Point, ScalarField, Sign, VectorField};
use crate::lp::{besov_11_fd, besov_inf_inf, default_hmax, smoothstep, LPBank};
use crate::sparse::{semi_mixed, PI3};

use super::linear_fit;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingParams {
    pub lambda: f64,
    pub delta: f64,
    pub eps: f64,
    pub eta: f64,
    pub c_star: f64,
    pub c_lambda_delta: f64,
}

impl MixingParams {
    /// `(δ(1+λ) − 1)/2`, the factor relating `c(λ,δ)` to `c*`.
    pub fn margin(&self) -> f64 {
        margin(self.lambda, self.delta)
    }

    /// `c(λ,δ)·r^ε·‖u‖∞`.
    pub fn threshold(&self, r: f64, linf: f64) -> f64 {
        self.c_lambda_delta * r.powf(self.eps) * linf
    }
}

fn margin(lambda: f64, delta: f64) -> f64 {
    (delta * (1.0 + lambda) - 1.0) / 2.0
}

/// `η` solving `(1+η)³ = (δ(1+λ)+1)/2`.
pub fn eta_for(lambda: f64, delta: f64) -> f64 {
    ((delta * (1.0 + lambda) + 1.0) / 2.0).cbrt() - 1.0
}

pub fn mixing_constant(lambda: f64, delta: f64, eps: f64, c_star: f64) -> Result<MixingParams> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return invalid(format!("level {lambda} outside (0, 1)"));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return invalid(format!("smoothness {eps} outside (0, 1]"));
    }
    if !(c_star > 0.0 && c_star.is_finite()) {
        return invalid(format!("constant c* = {c_star} must be positive"));
    }
    if !(delta < 1.0) {
        return invalid(format!("ratio {delta} must be below 1"));
    }
    if !(delta > 1.0 / (1.0 + lambda)) {
        return Err(Error::HypothesisViolation(format!(
            "ratio {delta} must exceed 1/(1+λ) = {}",
            1.0 / (1.0 + lambda)
        )));
    }
    Ok(MixingParams {
        lambda,
        delta,
        eps,
        eta: eta_for(lambda, delta),
        c_star,
        c_lambda_delta: c_star * margin(lambda, delta),
    })
}

fn distance(grid: &Grid3, a: Point, b: Point) -> f64 {
    let d = [grid.wrap(a[0] - b[0]), grid.wrap(a[1] - b[1]), grid.wrap(a[2] - b[2])];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Radial profile equal to 1 up to `r`, 0 beyond `(1+η)r`, smoothstep between.
pub fn cutoff_profile(rho: f64, r: f64, eta: f64) -> f64 {
    1.0 - smoothstep((rho - r) / (eta * r))
}

pub fn build_cutoff(x0: Point, r: f64, eta: f64, grid: &Grid3) -> Result<ScalarField> {
    if !(r > 0.0 && eta > 0.0) {
        return invalid(format!("cutoff needs r > 0 and η > 0, got r = {r}, η = {eta}"));
    }
    if (1.0 + eta) * r > 0.25 * grid.length() * (1.0 + 1e-12) {
        return invalid(format!("cutoff support {} exceeds L/4 = {}", (1.0 + eta) * r, 0.25 * grid.length()));
    }
    ScalarField::from_fn(*grid, |x| cutoff_profile(distance(grid, x, x0), r, eta))
}

/// Finite-difference norms of cutoffs across radii, and the fitted power law.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutoffLaw {
    pub eps: f64,
    pub eta: f64,
    pub radii: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
    /// `max ‖f‖/r^{3−ε}` over the radii.
    pub c_eta: f64,
}

pub fn cutoff_norm_law(grid: &Grid3, eps: f64, eta: f64, radii: &[f64]) -> Result<CutoffLaw> {
    if radii.len() < 2 {
        return invalid("need at least two radii for a power-law fit");
    }
    let mut norms = Vec::with_capacity(radii.len());
    for &r in radii {
        let f = build_cutoff([0.0; 3], r, eta, grid)?;
        norms.push(besov_11_fd(&f, eps, default_hmax(grid))?);
    }
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let fit = linear_fit(&lx, &ly);
    let c_eta = radii.iter().zip(&norms).map(|(r, v)| v / r.powf(3.0 - eps)).fold(0.0, f64::max);
    Ok(CutoffLaw { eps, eta, radii: radii.to_vec(), norms, slope: fit.slope, c_eta })
}

/// Outcome of [`calibrate_cstar`], written to `calibration.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub c_star: f64,
    /// Duality constant `c`, after the safety factor.
    pub c_dual: f64,
    /// Cutoff constant `c(η)`.
    pub c_eta: f64,
    pub eta: f64,
    pub eps: f64,
    pub seed: u64,
    pub trials: usize,
    pub effective_trials: usize,
    pub safety: f64,
    pub n: usize,
    pub length: f64,
}

pub const CALIBRATION_SAFETY: f64 = 0.9;
pub const MIN_CALIBRATION_TRIALS: usize = 20;

/// Radius range used for calibration cutoffs on `grid`.
pub fn calibration_radii(grid: &Grid3, eta: f64) -> (f64, f64) {
    let lo = (grid.length() / 16.0).max(2.0 * grid.spacing());
    let hi = 0.7 * 0.25 * grid.length() / (1.0 + eta);
    (lo, hi.max(lo))
}

/// Measures `c* = c/c(η)` on synthetic fields.
///
/// Each trial pairs a field `u` (a single cosine inside one ring, or a
/// Gaussian bump) with a cutoff `f` at a random centre and radius. The
/// duality constant is the smallest observed `‖u‖_{B^{−ε}}·‖f‖_{B^ε}/|∫uf|`
/// times [`CALIBRATION_SAFETY`]; `c(η)` is the largest `‖f‖_{B^ε}/r^{3−ε}`.
pub fn calibrate_cstar(grid: &Grid3, eta: f64, eps: f64, trials: usize, seed: u64) -> Result<Calibration> {
    if trials < MIN_CALIBRATION_TRIALS {
        return invalid(format!("calibration needs at least {MIN_CALIBRATION_TRIALS} trials, got {trials}"));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return invalid(format!("smoothness {eps} outside (0, 1]"));
    }
    let bank = LPBank::new(*grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r_lo, r_hi) = calibration_radii(grid, eta);
    let half = 0.5 * grid.length();
    let ring_modes: Vec<f64> =
        (1..=bank.jmax()).map(|j| 3.0 * f64::powi(2.0, j - 1)).filter(|&k| k <= grid.n() as f64 / 3.0).collect();
    if ring_modes.is_empty() {
        return Err(Error::Calibration("grid too coarse for single-ring modes".into()));
    }

    let mut c_dual = f64::INFINITY;
    let mut c_eta = 0.0_f64;
    let mut used = 0;
    for t in 0..trials {
        let centre = [rng.gen_range(-half..half), rng.gen_range(-half..half), rng.gen_range(-half..half)];
        let r = rng.gen_range(r_lo..=r_hi);
        let f = build_cutoff(centre, r, eta, grid)?;
        let u = if t % 2 == 0 {
            let k = ring_modes[rng.gen_range(0..ring_modes.len())] * grid.length() / std::f64::consts::TAU;
            let k = k.round() * std::f64::consts::TAU / grid.length();
            let axis = rng.gen_range(0..3);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            ScalarField::from_fn(*grid, |x| (k * x[axis] + phase).cos())?
        } else {
            let shift: Point = [rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r)];
            let c = [centre[0] + shift[0], centre[1] + shift[1], centre[2] + shift[2]];
            let sigma = rng.gen_range(0.5 * r..2.0 * r);
            ScalarField::from_fn(*grid, |x| (-distance(grid, x, c).powi(2) / (2.0 * sigma * sigma)).exp())?
        };
        let norm_f = besov_11_fd(&f, eps, default_hmax(grid))?;
        c_eta = c_eta.max(norm_f / r.powf(3.0 - eps));
        let pairing = u.pairing(&f)?.abs();
        if pairing <= 1e-12 * u.linf_norm() * f.l1_norm() {
            continue;
        }
        let b = besov_inf_inf(&u, -eps, &bank)?.value;
        c_dual = c_dual.min(b * norm_f / pairing);
        used += 1;
    }
    if used == 0 || !c_dual.is_finite() || c_eta <= 0.0 {
        return Err(Error::Calibration("every trial was degenerate".into()));
    }
    let c_dual = CALIBRATION_SAFETY * c_dual;
    Ok(Calibration {
        c_star: c_dual / c_eta,
        c_dual,
        c_eta,
        eta,
        eps,
        seed,
        trials,
        effective_trials: used,
        safety: CALIBRATION_SAFETY,
        n: grid.n(),
        length: grid.length(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SetVerdict {
    pub component: usize,
    pub sign: Sign,
    pub max_fraction: f64,
    pub semi_mixed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaVerdict {
    pub params: MixingParams,
    pub r: f64,
    pub linf: f64,
    /// `‖u‖_{B^{−ε}_{∞,∞}}`.
    pub lhs: f64,
    pub j_star: i32,
    /// `c(λ,δ)·r^ε·‖u‖∞`.
    pub rhs: f64,
    pub hypothesis_met: bool,
    pub vacuous: bool,
    pub sets: Vec<SetVerdict>,
    pub all_semi_mixed: bool,
    /// Hypothesis met ⇒ all six sets semi-mixed; equivalently a failing set
    /// forces `lhs > rhs`.
    pub consistent: bool,
    pub note: Option<String>,
}

/// Checks the lemma on `u` at scale `r`: compares `‖u‖_{B^{−ε}}` with
/// `c(λ,δ) r^ε ‖u‖∞` and measures all six super-level sets.
pub fn verify_mixing_lemma(u: &VectorField, params: &MixingParams, r: f64, bank: &LPBank) -> Result<LemmaVerdict> {
    let g = u.grid();
    if !(r > 0.0 && r <= 1.0 && r <= 0.25 * g.length() * (1.0 + 1e-12)) {
        return invalid(format!("scale {r} must lie in (0, 1] and not exceed L/4"));
    }
    let linf = u.linf_norm();
    if linf == 0.0 {
        return Ok(LemmaVerdict {
            params: *params,
            r,
            linf,
            lhs: 0.0,
            j_star: LPBank::JMIN,
            rhs: 0.0,
            hypothesis_met: true,
            vacuous: true,
            sets: Vec::new(),
            all_semi_mixed: true,
            consistent: true,
            note: Some("zero field: every super-level set is empty".into()),
        });
    }
    let b = besov_inf_inf(u, -params.eps, bank)?;
    let rhs = params.threshold(r, linf);
    let hypothesis_met = b.value <= rhs;
    let mut sets = Vec::with_capacity(6);
    for set in all_component_superlevels(u, params.lambda)? {
        let rep = semi_mixed(&set, r, params.delta)?;
        sets.push(SetVerdict {
            component: set.meta().component.unwrap_or(0),
            sign: set.meta().sign,
            max_fraction: rep.ratio,
            semi_mixed: rep.pass,
        });
    }
    let all_semi_mixed = sets.iter().all(|s| s.semi_mixed);
    let note = (!hypothesis_met).then(|| "hypothesis not met".to_string());
    Ok(LemmaVerdict {
        params: *params,
        r,
        linf,
        lhs: b.value,
        j_star: b.j_star,
        rhs,
        hypothesis_met,
        vacuous: false,
        sets,
        all_semi_mixed,
        consistent: !hypothesis_met || all_semi_mixed,
        note,
    })
}

/// Quadrature of the three pieces of `∫ u_i f` around a crowded ball.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaTerms {
    /// `∫_{A∩B} u_i f`.
    pub i: f64,
    /// `∫_{B∖A} u_i f`.
    pub ii: f64,
    /// `∫_{B((1+η)r)∖B(r)} u_i f`.
    pub iii: f64,
    pub linf: f64,
    /// Measure of `A ∩ B(x₀,r)` divided by `Π(3)r³`.
    pub fraction: f64,
    /// `Π(3) r³`.
    pub ball: f64,
}

/// Splits `∫ u_i f` (with `−u_i` for the minus sign) over `A^{i,±}_λ ∩ B`,
/// `B ∖ A` and the cutoff shell. Balls use cell-centre membership.
pub fn lemma_terms(
    u: &VectorField,
    i: usize,
    sign: Sign,
    x0: Point,
    r: f64,
    eta: f64,
    lambda: f64,
) -> Result<LemmaTerms> {
    let g = *u.grid();
    let set = component_superlevel(u, i, sign, lambda)?;
    let f = build_cutoff(x0, r, eta, &g)?;
    let s = if sign == Sign::Plus { 1.0 } else { -1.0 };
    let ui = u.component(i - 1).data();
    let (mut t1, mut t2, mut t3, mut count) = (0.0, 0.0, 0.0, 0usize);
    for (idx, (&w, &fv)) in ui.iter().zip(f.data()).enumerate() {
        let rho = distance(&g, g.center(idx), x0);
        let v = s * w * fv;
        if rho <= r {
            if set.contains(idx) {
                t1 += v;
                count += 1;
            } else {
                t2 += v;
            }
        } else if rho < (1.0 + eta) * r {
            t3 += v;
        }
    }
    let dv = g.voxel_volume();
    let ball = PI3 * r.powi(3);
    Ok(LemmaTerms {
        i: t1 * dv,
        ii: t2 * dv,
        iii: t3 * dv,
        linf: u.linf_norm(),
        fraction: count as f64 * dv / ball,
        ball,
    })
}

/// A field built so that one super-level set crowds a ball of radius `r`.
#[derive(Clone, Debug)]
pub struct EngineeredViolation {
    pub u: VectorField,
    pub component: usize,
    pub sign: Sign,
    pub centre: Point,
    pub plateau: f64,
}

/// Plateau bump of radius `R ∈ [r, 1.5r]` on a random component with a
/// random sign, over a smooth background of at most `0.3` of its height.
pub fn engineered_violation(grid: &Grid3, r: f64, rng: &mut impl Rng) -> Result<EngineeredViolation> {
    let half = 0.5 * grid.length();
    let amp = rng.gen_range(0.5..4.0);
    let component = rng.gen_range(1..=3);
    let sign = if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus };
    let centre = [rng.gen_range(-half..half), rng.gen_range(-half..half), rng.gen_range(-half..half)];
    let plateau = rng.gen_range(r..=1.5 * r);
    let width = (0.5 * r).max(2.0 * grid.spacing());
    let k0 = std::f64::consts::TAU / grid.length();
    // three low modes per component, each at most 0.1·amp
    let modes: Vec<[f64; 6]> = (0..9)
        .map(|_| {
            [
                rng.gen_range(-2..=2) as f64 * k0,
                rng.gen_range(-2..=2) as f64 * k0,
                rng.gen_range(-2..=2) as f64 * k0,
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..0.1) * amp,
                0.0,
            ]
        })
        .collect();
    let s = if sign == Sign::Plus { 1.0 } else { -1.0 };
    let u = VectorField::from_fn(*grid, |x| {
        let mut v = [0.0; 3];
        for (c, out) in v.iter_mut().enumerate() {
            for m in &modes[3 * c..3 * c + 3] {
                *out += m[4] * (m[0] * x[0] + m[1] * x[1] + m[2] * x[2] + m[3]).cos();
            }
        }
        let rho = distance(grid, x, centre);
        v[component - 1] += s * amp * (1.0 - smoothstep((rho - plateau) / width));
        v
    })?;
    Ok(EngineeredViolation { u, component, sign, centre, plateau })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_at_the_standard_instance() {
        let p = mixing_constant(0.5, 0.75, 1.0, 2.0).unwrap();
        assert!(((1.0 + p.eta).powi(3) - 1.0625).abs() < 1e-12);
        assert!((p.eta - (1.0625f64.cbrt() - 1.0)).abs() < 1e-15);
        assert!((p.eta - 0.020411).abs() < 1e-5);
        assert_eq!(p.margin(), 0.0625);
        assert_eq!(p.c_lambda_delta, 0.125);
        assert!(matches!(mixing_constant(0.5, 2.0 / 3.0, 1.0, 1.0), Err(Error::HypothesisViolation(_))));
        assert!(mixing_constant(0.5, 0.75, 0.0, 1.0).is_err());
        assert!(mixing_constant(1.0, 0.75, 1.0, 1.0).is_err());
    }

    #[test]
    fn constant_degenerates_at_the_boundary() {
        let lo = 1.0 / 1.5;
        let mut prev = 0.0;
        for k in (1..8).rev() {
            let c = mixing_constant(0.5, lo + f64::powi(10.0, -k), 1.0, 1.0).unwrap().c_lambda_delta;
            assert!(c > prev);
            prev = c;
        }
        assert!(mixing_constant(0.5, lo + 1e-12, 1.0, 1.0).unwrap().c_lambda_delta < 1e-11);
    }

    #[test]
    fn cutoff_shape() {
        let g = Grid3::cube(32).unwrap();
        let r = g.length() / 16.0;
        let f = build_cutoff([0.0; 3], r, 0.5, &g).unwrap();
        assert!(f.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(cutoff_profile(0.0, r, 0.5), 1.0);
        assert_eq!(cutoff_profile(2.0 * 1.5 * r, r, 0.5), 0.0);
        assert!(build_cutoff([0.0; 3], g.length() / 4.0, 0.5, &g).is_err());
    }

    #[test]
    fn cutoff_integral_exceeds_ball() {
        let g = Grid3::cube(64).unwrap();
        let r = g.length() / 8.0;
        let f = build_cutoff([0.0; 3], r, 0.5, &g).unwrap();
        assert!(f.integral() >= PI3 * r.powi(3) * 0.98);
    }

    #[test]
    fn zero_field_is_vacuous() {
        let g = Grid3::cube(16).unwrap();
        let bank = LPBank::new(g).unwrap();
        let p = mixing_constant(0.5, 0.75, 1.0, 1.0).unwrap();
        let v = verify_mixing_lemma(&VectorField::zeros(g), &p, 1.0, &bank).unwrap();
        assert!(v.vacuous && v.consistent);
    }

    #[test]
    fn high_mode_with_large_constant_meets_hypothesis() {
        let g = Grid3::cube(32).unwrap();
        let bank = LPBank::new(g).unwrap();
        let u = VectorField::from_fn(g, |x| [0.01 * (12.0 * x[1]).cos(), 0.01 * (12.0 * x[2]).sin(), 0.0]).unwrap();
        let p = mixing_constant(0.5, 0.75, 1.0, 100.0).unwrap();
        let v = verify_mixing_lemma(&u, &p, 1.0, &bank).unwrap();
        assert!(v.hypothesis_met && v.all_semi_mixed && v.consistent);
        assert!(v.sets.iter().all(|s| s.max_fraction <= 0.75));
    }

    #[test]
    fn calibration_is_seed_reproducible() {
        let g = Grid3::cube(16).unwrap();
        let a = calibrate_cstar(&g, 0.5, 1.0, 20, 7).unwrap();
        let b = calibrate_cstar(&g, 0.5, 1.0, 20, 7).unwrap();
        assert_eq!(a.c_star.to_bits(), b.c_star.to_bits());
        assert!(a.c_star > 0.0 && a.effective_trials > 0);
        assert!(calibrate_cstar(&g, 0.5, 1.0, 5, 7).is_err());
    }

    #[test]
    fn engineered_violation_fails_semi_mixedness() {
        let g = Grid3::cube(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let v = engineered_violation(&g, 0.8, &mut rng).unwrap();
            let set = component_superlevel(&v.u, v.component, v.sign, 0.5).unwrap();
            assert!(!semi_mixed(&set, 0.8, 0.75).unwrap().pass);
        }
    }

    #[test]
    fn split_integral_bounds() {
        let g = Grid3::cube(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (lambda, delta) = (0.5, 0.75);
        let eta = eta_for(lambda, delta);
        let r = 0.9;
        let v = engineered_violation(&g, r, &mut rng).unwrap();
        let t = lemma_terms(&v.u, v.component, v.sign, v.centre, r, eta, lambda).unwrap();
        assert!(t.fraction > delta);
        let unit = t.ball * t.linf;
        assert!(t.i > lambda * delta * unit * 0.98);
        assert!(t.ii.abs() <= (1.0 - delta) * unit + 0.02 * unit);
        assert!(t.iii.abs() <= ((1.0 + eta).powi(3) - 1.0) * unit + 0.02 * unit);
    }
}
