//! Complex 3D FFT on `n³` cubes stored x-fastest.
//!
//! Built from 1D `rustfft` plans applied along each axis. Lines are
//! independent, so the passes parallelise without changing the result.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::fields::{Grid3, ScalarField};

pub type Spectrum = Vec<Complex64>;

#[derive(Clone)]
pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn for_grid(grid: &Grid3) -> Self {
        Self::new(grid.n())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unnormalised forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform in place, normalised by `1/n³`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "buffer does not match the plan size");
        let plane = n * n;

        // x: contiguous lines
        data.par_chunks_mut(plane).for_each(|slab| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            plan.process_with_scratch(slab, &mut scratch);
        });

        // y: stride n inside each z-slab
        data.par_chunks_mut(plane).for_each(|slab| {
            let mut line = vec![Complex64::default(); n];
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            for i in 0..n {
                for j in 0..n {
                    line[j] = slab[i + n * j];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for j in 0..n {
                    slab[i + n * j] = line[j];
                }
            }
        });

        // z: gather columns into a transposed buffer, transform, scatter back
        let mut cols = vec![Complex64::default(); data.len()];
        cols.par_chunks_mut(n).enumerate().for_each(|(col, line)| {
            for (k, v) in line.iter_mut().enumerate() {
                *v = data[col + plane * k];
            }
        });
        cols.par_chunks_mut(plane).for_each(|block| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            plan.process_with_scratch(block, &mut scratch);
        });
        data.par_chunks_mut(plane).enumerate().for_each(|(k, slab)| {
            for (col, v) in slab.iter_mut().enumerate() {
                *v = cols[col * n + k];
            }
        });
    }

    pub fn forward_real(&self, samples: &[f64]) -> Spectrum {
        let mut buf: Spectrum = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform keeping the real part; the imaginary residue of a
    /// conjugate-symmetric spectrum is rounding noise.
    pub fn inverse_real(&self, mut spectrum: Spectrum) -> Vec<f64> {
        self.inverse(&mut spectrum);
        spectrum.into_iter().map(|c| c.re).collect()
    }

    /// Same as [`inverse_real`](Self::inverse_real) but leaves `spectrum` intact.
    pub fn inverse_real_from(&self, spectrum: &[Complex64], scratch: &mut Spectrum) -> Vec<f64> {
        scratch.clear();
        scratch.extend_from_slice(spectrum);
        self.inverse(scratch);
        scratch.iter().map(|c| c.re).collect()
    }

    /// Inverse transforms of two conjugate-symmetric spectra with one FFT.
    pub fn inverse_real_pair(&self, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Spectrum = a.par_iter().zip(b).map(|(x, y)| x + Complex64::i() * y).collect();
        self.inverse(&mut buf);
        buf.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    /// Forward transforms of two real arrays with one FFT.
    pub fn forward_real_pair(&self, p: &[f64], q: &[f64]) -> (Spectrum, Spectrum) {
        let n = self.n;
        let mut z: Spectrum = p.par_iter().zip(q).map(|(&a, &b)| Complex64::new(a, b)).collect();
        self.forward(&mut z);
        let neg = |m: usize| (n - m) % n;
        (0..z.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
                let zm = z[neg(i) + n * (neg(j) + n * neg(k))].conj();
                ((z[idx] + zm) * 0.5, (z[idx] - zm) * Complex64::new(0.0, -0.5))
            })
            .unzip()
    }

    pub fn field_spectrum(&self, f: &ScalarField) -> Spectrum {
        self.forward_real(f.data())
    }
}

/// Zero every mode with some `|k_i| > n/3` (the 2/3 rule).
pub fn dealias_spectrum(grid: &Grid3, spectrum: &mut [Complex64]) {
    let cut = grid.n() as i64 / 3;
    spectrum.par_iter_mut().enumerate().for_each(|(idx, v)| {
        let (i, j, k) = grid.unravel(idx);
        let keep = [i, j, k].iter().all(|&m| grid.signed_mode(m).abs() <= cut);
        if !keep {
            *v = Complex64::default();
        }
    });
}

/// True when the mode at `idx` survives the 2/3 rule.
pub fn is_retained(grid: &Grid3, idx: usize) -> bool {
    let cut = grid.n() as i64 / 3;
    let (i, j, k) = grid.unravel(idx);
    [i, j, k].iter().all(|&m| grid.signed_mode(m).abs() <= cut)
}

pub fn dealias(f: &ScalarField) -> ScalarField {
    let fft = Fft3::for_grid(f.grid());
    let mut spec = fft.field_spectrum(f);
    dealias_spectrum(f.grid(), &mut spec);
    ScalarField::from_parts_unchecked(*f.grid(), fft.inverse_real(spec))
}
