//! Pseudospectral Kuramoto–Sivashinsky integrators on periodic domains.
//!
//! 2D: `∂u/∂t = -½|∇u|² - ∇²u - ∇⁴u`, ETDRK4 in time, 2/3-rule dealiasing of
//! the quadratic term, and the mean Fourier mode forced to zero after every
//! stage so the spatial mean cannot drift.
//!
//! 1D: `∂u/∂t = -u u_x - u_xx - u_xxxx`, ETDRK2 in time, written in
//! conservative form `-½ (u²)_x`.

use rustfft::num_complex::Complex64;

use super::etdrk::{etdrk_coefficients, EtdrkCoefficients, DEFAULT_CONTOUR_POINTS};
use super::{Equation, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{Field, StateLayout};
use crate::spectral::{signed_freq, Fft1, Fft2};

fn check_run(dt: f64, steps: usize, skip: usize, domain_length: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param(format!("dt must be > 0, got {dt}")));
    }
    if steps == 0 || skip == 0 {
        return Err(Error::param("steps and skip must be >= 1"));
    }
    if !(domain_length > 0.0 && domain_length.is_finite()) {
        return Err(Error::param(format!("domain length must be > 0, got {domain_length}")));
    }
    Ok(())
}

fn diverged(spec: &[Complex64], step: usize) -> Result<()> {
    if spec.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            step,
            what: "non-finite Fourier coefficients".into(),
        })
    }
}

/// ETDRK4 stepper for the 2D equation on an `n x n` grid of side `domain_length`.
pub struct Kse2dStepper {
    n: usize,
    kx: Vec<f64>,
    ky: Vec<f64>,
    dealias: Vec<bool>,
    coeffs: EtdrkCoefficients,
    fft: Fft2,
    work: [Vec<Complex64>; 2],
    stages: Vec<Vec<Complex64>>,
}

impl Kse2dStepper {
    pub fn new(n: usize, domain_length: f64, dt: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::param(format!("2D KSE grid needs n >= 4, got {n}")));
        }
        check_run(dt, 1, 1, domain_length)?;
        let w = 2.0 * std::f64::consts::PI / domain_length;
        let cutoff = n as f64 / 3.0;
        let mut kx = Vec::with_capacity(n * n);
        let mut ky = Vec::with_capacity(n * n);
        let mut dealias = Vec::with_capacity(n * n);
        let mut symbol = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let (ia, ib) = (signed_freq(a, n), signed_freq(b, n));
                // odd derivatives drop the unpaired Nyquist bin
                let odd = |i: i64| if 2 * i.unsigned_abs() as usize == n { 0.0 } else { w * i as f64 };
                kx.push(odd(ia));
                ky.push(odd(ib));
                let k2 = (w * ia as f64).powi(2) + (w * ib as f64).powi(2);
                symbol.push(k2 - k2 * k2);
                dealias.push((ia.abs() as f64) < cutoff && (ib.abs() as f64) < cutoff);
            }
        }
        let coeffs = etdrk_coefficients(&symbol, dt, DEFAULT_CONTOUR_POINTS)?;
        Ok(Kse2dStepper {
            n,
            kx,
            ky,
            dealias,
            coeffs,
            fft: Fft2::new(n),
            work: [vec![Complex64::default(); n * n], vec![Complex64::default(); n * n]],
            stages: vec![vec![Complex64::default(); n * n]; 7],
        })
    }

    pub fn coefficients(&self) -> &EtdrkCoefficients {
        &self.coeffs
    }

    /// Spectrum of a physical field with the mean mode removed.
    pub fn to_spectral(&mut self, u: &[f64]) -> Vec<Complex64> {
        let mut v = self.fft.forward_real(u);
        v[0] = Complex64::default();
        v
    }

    pub fn to_physical(&mut self, v: &[Complex64]) -> Vec<f64> {
        self.fft.inverse_real(v)
    }

    /// Nonlinear term `-½|∇u|²` in spectral space, dealiased and mean-free.
    fn nonlinear(&mut self, v: &[Complex64], out: &mut [Complex64]) {
        let i = Complex64::new(0.0, 1.0);
        let [ux, uy] = &mut self.work;
        for k in 0..v.len() {
            ux[k] = i * self.kx[k] * v[k];
            uy[k] = i * self.ky[k] * v[k];
        }
        self.fft.inverse(ux);
        self.fft.inverse(uy);
        for k in 0..v.len() {
            out[k] = Complex64::new(-0.5 * (ux[k].re * ux[k].re + uy[k].re * uy[k].re), 0.0);
        }
        self.fft.forward(out);
        for (z, &keep) in out.iter_mut().zip(&self.dealias) {
            if !keep {
                *z = Complex64::default();
            }
        }
        out[0] = Complex64::default();
    }

    /// One ETDRK4 step in place.
    pub fn step(&mut self, v: &mut [Complex64]) {
        let len = v.len();
        let mut stages = std::mem::take(&mut self.stages);
        let [nv, na, nb, nc, a, b, cc] = &mut stages[..] else {
            unreachable!("seven stage buffers")
        };

        self.nonlinear(v, nv);
        let c = &self.coeffs;
        for k in 0..len {
            a[k] = c.e_half[k] * v[k] + c.q[k] * nv[k];
        }
        self.nonlinear(a, na);
        let c = &self.coeffs;
        for k in 0..len {
            b[k] = c.e_half[k] * v[k] + c.q[k] * na[k];
        }
        self.nonlinear(b, nb);
        let c = &self.coeffs;
        for k in 0..len {
            cc[k] = c.e_half[k] * a[k] + c.q[k] * (2.0 * nb[k] - nv[k]);
        }
        self.nonlinear(cc, nc);
        let c = &self.coeffs;
        for k in 0..len {
            v[k] = c.e[k] * v[k] + nv[k] * c.f1[k] + 2.0 * (na[k] + nb[k]) * c.f2[k] + nc[k] * c.f3[k];
        }
        self.stages = stages;
        v[0] = Complex64::default();
    }

    pub fn side(&self) -> usize {
        self.n
    }
}

/// Integrate the 2D equation from `u0`.
///
/// States are indexed `0..steps`; every `skip`-th is stored and the first
/// `burn_in` stored frames are dropped. The initial mean is removed.
pub fn simulate_kse2d(
    u0: &Field,
    domain_length: f64,
    dt: f64,
    steps: usize,
    skip: usize,
    burn_in: usize,
) -> Result<Trajectory> {
    check_run(dt, steps, skip, domain_length)?;
    let n = u0.side();
    let stored = steps.div_ceil(skip);
    if burn_in >= stored {
        return Err(Error::param(format!(
            "burn-in of {burn_in} frames leaves nothing of {stored} stored frames"
        )));
    }
    let mut stepper = Kse2dStepper::new(n, domain_length, dt)?;
    let mut v = stepper.to_spectral(u0.as_slice());
    let mut frames = Vec::with_capacity(stored - burn_in);
    let mut kept = 0usize;
    for tau in 0..steps {
        if tau % skip == 0 {
            if kept >= burn_in {
                frames.push(stepper.to_physical(&v));
            }
            kept += 1;
        }
        if tau + 1 == steps {
            break;
        }
        stepper.step(&mut v);
        diverged(&v, tau + 1)?;
    }
    Ok(Trajectory {
        layout: StateLayout::Scalar { n },
        frames,
        dt: dt * skip as f64,
        skip,
        burn_in,
        equation: Equation::Kse2d { domain_length },
        seed: None,
    })
}

/// Linear symbol `k² - k⁴` and wavenumbers `k = 2π j / L` of the 1D equation.
pub fn kse1d_symbol(n: usize, domain_length: f64) -> (Vec<f64>, Vec<f64>) {
    let w = 2.0 * std::f64::consts::PI / domain_length;
    let k: Vec<f64> = (0..n).map(|j| w * signed_freq(j, n) as f64).collect();
    let symbol = k.iter().map(|&k| k * k - k.powi(4)).collect();
    (k, symbol)
}

/// ETDRK2 stepper for the 1D equation with `n` Fourier modes.
pub struct Kse1dStepper {
    n: usize,
    domain_length: f64,
    ik: Vec<Complex64>,
    coeffs: EtdrkCoefficients,
    fft: Fft1,
}

impl Kse1dStepper {
    pub fn new(n: usize, domain_length: f64, dt: f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::param(format!("1D KSE needs N >= 8 modes, got {n}")));
        }
        check_run(dt, 1, 1, domain_length)?;
        let (k, symbol) = kse1d_symbol(n, domain_length);
        let ik = k
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                if 2 * j == n {
                    Complex64::default()
                } else {
                    Complex64::new(0.0, k)
                }
            })
            .collect();
        Ok(Kse1dStepper {
            n,
            domain_length,
            ik,
            coeffs: etdrk_coefficients(&symbol, dt, DEFAULT_CONTOUR_POINTS)?,
            fft: Fft1::new(n),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn coefficients(&self) -> &EtdrkCoefficients {
        &self.coeffs
    }

    /// `i k` per mode, zero at the Nyquist bin.
    pub fn wavenumbers(&self) -> &[Complex64] {
        &self.ik
    }

    pub fn fft(&mut self) -> &mut Fft1 {
        &mut self.fft
    }

    /// `-½ (u²)_x` in spectral space for a spectral state `v`.
    pub fn nonlinear(&mut self, v: &[Complex64]) -> Vec<Complex64> {
        let u = self.fft.inverse_real(v);
        let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
        let mut out = self.fft.forward_real(&sq);
        for (z, ik) in out.iter_mut().zip(&self.ik) {
            *z *= -0.5 * ik;
        }
        out
    }

    /// One Cox–Matthews ETDRK2 step in place.
    pub fn step(&mut self, v: &mut [Complex64]) {
        let nv = self.nonlinear(v);
        let c = &self.coeffs;
        let a: Vec<Complex64> = (0..self.n).map(|k| c.e[k] * v[k] + c.phi1[k] * nv[k]).collect();
        let na = self.nonlinear(&a);
        let c = &self.coeffs;
        for k in 0..self.n {
            v[k] = a[k] + c.phi2[k] * (na[k] - nv[k]);
        }
    }
}

/// Integrate the 1D equation, storing all `steps` states (state 0 is `u0`).
pub fn simulate_kse1d(u0: &[f64], domain_length: f64, dt: f64, steps: usize) -> Result<Trajectory> {
    check_run(dt, steps, 1, domain_length)?;
    let n = u0.len();
    let mut stepper = Kse1dStepper::new(n, domain_length, dt)?;
    let mut v = stepper.fft().forward_real(u0);
    let mut frames = Vec::with_capacity(steps);
    for tau in 0..steps {
        frames.push(stepper.fft().inverse_real(&v));
        if tau + 1 == steps {
            break;
        }
        stepper.step(&mut v);
        diverged(&v, tau + 1)?;
    }
    Ok(Trajectory {
        layout: StateLayout::Line { n },
        frames,
        dt,
        skip: 1,
        burn_in: 0,
        equation: Equation::Kse1d { domain_length },
        seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_a_fixed_point_in_2d() {
        let t = simulate_kse2d(&Field::zeros(8), 20.0, 0.01, 30, 3, 2).unwrap();
        assert_eq!(t.len(), 8);
        assert!(t.frames.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn frame_bookkeeping_matches_dataset_recipe_shape() {
        // 25000 steps, 1 in 10 kept, 500 dropped -> 2000; checked at a scaled-down size
        let stored = 25000usize.div_ceil(10);
        assert_eq!(stored - 500, 2000);
        let u0 = Field::from_fn(8, |i, j| 0.1 * ((i + 2 * j) as f64).sin());
        let t = simulate_kse2d(&u0, 20.0, 0.01, 250, 10, 5).unwrap();
        assert_eq!(t.len(), 20);
        assert_eq!(t.burn_in, 5);
        assert!(simulate_kse2d(&u0, 20.0, 0.01, 250, 10, 25).is_err());
    }

    #[test]
    fn zero_is_a_fixed_point_in_1d() {
        let t = simulate_kse1d(&[0.0; 16], 20.0, 0.01, 20).unwrap();
        assert_eq!(t.len(), 20);
        assert!(t.frames.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn mean_stays_zero_in_2d() {
        let u0 = Field::from_fn(16, |i, j| 1.0 + (0.4 * i as f64).sin() * (0.8 * j as f64).cos());
        let t = simulate_kse2d(&u0, 12.0, 0.01, 50, 5, 0).unwrap();
        for f in &t.frames {
            let mean = f.iter().sum::<f64>() / f.len() as f64;
            assert!(mean.abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(simulate_kse1d(&[0.0; 4], 20.0, 0.01, 5).is_err());
        assert!(simulate_kse1d(&[0.0; 16], 20.0, -0.01, 5).is_err());
        assert!(simulate_kse2d(&Field::zeros(8), 0.0, 0.01, 5, 1, 0).is_err());
    }
}
