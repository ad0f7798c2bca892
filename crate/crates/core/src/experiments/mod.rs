//! Desk-scale reproductions of the mixing lemma, its counterexample and
//! the mollified-logarithm example.

pub mod dome;
pub mod mixing;
pub mod mollified;

pub use dome::{
    build_dome_lightning_rod, counterexample_report, default_host_grid, sample_dome, zoom_grid, CounterexampleRow,
    DomeProfile,
};
pub use mixing::{
    build_cutoff, calibrate_cstar, cutoff_norm_law, engineered_violation, eta_for, lemma_terms, mixing_constant,
    verify_mixing_lemma, Calibration, CutoffLaw, EngineeredViolation, LemmaTerms, LemmaVerdict, MixingParams,
    SetVerdict,
};
pub use mollified::{build_mollified_log, mollified_log_norms, mollified_log_report, MollifiedLogRow};

/// Least-squares line through `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit { slope, intercept: my - slope * mx, r_squared }
}
