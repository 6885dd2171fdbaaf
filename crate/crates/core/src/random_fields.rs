//! Mean-zero Gaussian random fields with a periodic Matérn spectrum.
//!
//! Fields are synthesised spectrally: real white noise is transformed,
//! each Fourier coefficient is weighted by `sqrt(S(κ))` with
//! `S(κ) = (|κ|² + m²)^(-ν)`, and the result is transformed back. Because
//! the weights are even in `κ` and the noise is real, Hermitian symmetry
//! holds automatically. Frequencies are expressed in lattice units,
//! `κ = 2π k / n` for signed bin indices `k`, so `m` is an inverse length
//! measured in lattice steps.
//!
//! Normalization: the constant mode is excluded (`S(0) := 0`) and the
//! remaining weights are scaled so that `sigma` is the exact pointwise
//! standard deviation. The resulting covariance is
//!
//! ```text
//! C(r) = σ² Σ_{k≠0} S(κ_k) cos(κ_k·r) / Σ_{k≠0} S(κ_k)
//! ```
//!
//! Random numbers come from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded
//! with `seed_from_u64`; the stream is fixed with
//! `set_stream`, which keeps datasets reproducible across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::spectral::{signed_freq, Fft2};

/// Stream used for initial conditions.
pub const STREAM_INITIAL: u64 = 0;

/// Seeded ChaCha20 generator on a given stream.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrfParams {
    pub grid_size: usize,
    /// Pointwise standard deviation (linear amplitude scale).
    pub sigma: f64,
    /// Inverse correlation length in lattice-step units.
    pub m: f64,
    /// Matérn smoothness.
    pub nu: f64,
    pub seed: u64,
}

impl GrfParams {
    /// Noise strength 10, `m = 0.1`, `ν = 1`: the initial-condition setting of the datasets.
    pub fn dataset_default(grid_size: usize, seed: u64) -> Self {
        GrfParams {
            grid_size,
            sigma: 10.0,
            m: 0.1,
            nu: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 {
            return Err(Error::param(format!("grid_size must be >= 2, got {}", self.grid_size)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::param(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::param(format!("m must be > 0, got {}", self.m)));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::param(format!("nu must be > 0, got {}", self.nu)));
        }
        Ok(())
    }
}

#[inline]
fn spectral_density(kx: i64, ky: i64, n: usize, m: f64, nu: f64) -> f64 {
    if kx == 0 && ky == 0 {
        return 0.0;
    }
    let w = 2.0 * std::f64::consts::PI / n as f64;
    let k2 = (kx as f64 * w).powi(2) + (ky as f64 * w).powi(2);
    (k2 + m * m).powf(-nu)
}

fn density_total(n: usize, m: f64, nu: f64) -> f64 {
    let mut total = 0.0;
    for a in 0..n {
        for b in 0..n {
            total += spectral_density(signed_freq(a, n), signed_freq(b, n), n, m, nu);
        }
    }
    total
}

/// Draw one field from the `ChaCha20` stream [`STREAM_INITIAL`] of `params.seed`.
pub fn sample_matern_field(params: &GrfParams) -> Result<Field> {
    params.validate()?;
    let n = params.grid_size;
    let mut rng = seeded_rng(params.seed, STREAM_INITIAL);
    let mut buf: Vec<Complex64> = (0..n * n)
        .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();

    let mut fft = Fft2::new(n);
    fft.forward(&mut buf);
    let scale = params.sigma * n as f64 / density_total(n, params.m, params.nu).sqrt();
    for a in 0..n {
        for b in 0..n {
            let s = spectral_density(signed_freq(a, n), signed_freq(b, n), n, params.m, params.nu);
            buf[a * n + b] *= s.sqrt() * scale;
        }
    }
    fft.inverse(&mut buf);
    Field::from_vec(n, buf.into_iter().map(|z| z.re).collect())
}

/// Conductivity `a = exp(Z)` with `Z = sample_matern_field(params)`.
///
/// Callers keep conductivity independent of the initial condition by
/// giving it its own seed.
pub fn build_conductivity(params: &GrfParams) -> Result<Field> {
    Ok(sample_matern_field(params)?.map(f64::exp))
}

/// Covariance of the sampler at lattice lag `offset`, as a truncated cosine series.
///
/// Sums over signed frequency indices with `|k|∞ <= truncation` (clipped to
/// the grid's Nyquist band) and uses the same normalization constant as the
/// sampler, so `truncation >= grid_size / 2` reproduces the exact
/// covariance of [`sample_matern_field`].
pub fn periodic_matern_covariance(offset: [i64; 2], params: &GrfParams, truncation: usize) -> Result<f64> {
    params.validate()?;
    if truncation < 1 {
        return Err(Error::param("truncation must be >= 1"));
    }
    let n = params.grid_size;
    let hi = (n / 2) as i64;
    let lo = -(((n - 1) / 2) as i64);
    let t = truncation as i64;
    let w = 2.0 * std::f64::consts::PI / n as f64;
    let mut acc = 0.0;
    for kx in lo.max(-t)..=hi.min(t) {
        for ky in lo.max(-t)..=hi.min(t) {
            let s = spectral_density(kx, ky, n, params.m, params.nu);
            acc += s * (w * (kx * offset[0] + ky * offset[1]) as f64).cos();
        }
    }
    Ok(params.sigma * params.sigma * acc / density_total(n, params.m, params.nu))
}
