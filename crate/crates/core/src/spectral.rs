//! Thin 1D/2D FFT wrappers over `rustfft` for square periodic grids.
//!
//! Forward transforms are unnormalized; inverse transforms divide by the
//! number of points, so `inverse(forward(x)) == x` up to round-off.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Signed frequency index of FFT bin `k` on an `n`-point axis.
#[inline]
pub fn signed_freq(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Planned forward/inverse 2D transforms on an `n x n` row-major grid.
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    column: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Fft2 {
            n,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
            column: vec![Complex64::default(); n],
        }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.apply(data, true);
    }

    /// Inverse transform including the `1/n^2` normalization.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.apply(data, false);
        let scale = 1.0 / (self.n * self.n) as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn apply(&mut self, data: &mut [Complex64], forward: bool) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "fft2 buffer must be n*n");
        let plan = if forward { &self.forward } else { &self.inverse };
        for row in data.chunks_exact_mut(n) {
            plan.process_with_scratch(row, &mut self.scratch);
        }
        for j in 0..n {
            for i in 0..n {
                self.column[i] = data[i * n + j];
            }
            plan.process_with_scratch(&mut self.column, &mut self.scratch);
            for i in 0..n {
                data[i * n + j] = self.column[i];
            }
        }
    }

    pub fn forward_real(&mut self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&mut self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut buf = spectrum.to_vec();
        self.inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }
}

/// Planned forward/inverse transforms on a periodic line.
pub struct Fft1 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fft1 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Fft1 {
            n,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
        let scale = 1.0 / self.n as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    pub fn forward_real(&mut self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    pub fn inverse_real(&mut self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut buf = spectrum.to_vec();
        self.inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }
}
