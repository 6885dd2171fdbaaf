//! Exponential time differencing coefficients.
//!
//! For a diagonal linear part with per-mode symbol `c` and step `h`, the
//! ETDRK2 (Cox–Matthews) and ETDRK4 (Kassam–Trefethen form) schemes need
//! the functions below evaluated at `z = h c`. Direct evaluation cancels
//! catastrophically near `z = 0`, so each one is computed as the mean of
//! its values on a circle of radius 1 centred at `z` (Cauchy's integral
//! formula discretised by the trapezoid rule), which converges
//! geometrically in the number of contour points.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

pub const DEFAULT_CONTOUR_POINTS: usize = 32;

/// Per-mode stage coefficients for step `dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct EtdrkCoefficients {
    pub dt: f64,
    pub contour_points: usize,
    /// `e^{hc}`
    pub e: Vec<f64>,
    /// `e^{hc/2}`
    pub e_half: Vec<f64>,
    /// `h (e^{z/2} - 1) / z`
    pub q: Vec<f64>,
    /// ETDRK4 weights for `N(v)`, `N(a) + N(b)` and `N(c)`.
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub f3: Vec<f64>,
    /// `h φ1(z) = h (e^z - 1) / z`
    pub phi1: Vec<f64>,
    /// `h φ2(z) = h (e^z - 1 - z) / z²`
    pub phi2: Vec<f64>,
}

impl EtdrkCoefficients {
    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }
}

pub fn etdrk_coefficients(symbol: &[f64], dt: f64, contour_points: usize) -> Result<EtdrkCoefficients> {
    if contour_points < 16 {
        return Err(Error::param(format!("contour_points must be >= 16, got {contour_points}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param(format!("dt must be > 0, got {dt}")));
    }
    let m = contour_points;
    let roots: Vec<Complex64> = (0..m)
        .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / m as f64))
        .collect();

    let n = symbol.len();
    let mut out = EtdrkCoefficients {
        dt,
        contour_points,
        e: Vec::with_capacity(n),
        e_half: Vec::with_capacity(n),
        q: Vec::with_capacity(n),
        f1: Vec::with_capacity(n),
        f2: Vec::with_capacity(n),
        f3: Vec::with_capacity(n),
        phi1: Vec::with_capacity(n),
        phi2: Vec::with_capacity(n),
    };
    for &c in symbol {
        let z = dt * c;
        out.e.push(z.exp());
        out.e_half.push((z / 2.0).exp());
        let mut acc = [Complex64::new(0.0, 0.0); 6];
        for r in &roots {
            let lr = z + r;
            let ez = lr.exp();
            let lr2 = lr * lr;
            let lr3 = lr2 * lr;
            acc[0] += ((lr / 2.0).exp() - 1.0) / lr;
            acc[1] += (-4.0 - lr + ez * (4.0 - 3.0 * lr + lr2)) / lr3;
            acc[2] += (2.0 + lr + ez * (lr - 2.0)) / lr3;
            acc[3] += (-4.0 - 3.0 * lr - lr2 + ez * (4.0 - lr)) / lr3;
            acc[4] += (ez - 1.0) / lr;
            acc[5] += (ez - 1.0 - lr) / lr2;
        }
        let mean = |k: usize| dt * acc[k].re / m as f64;
        out.q.push(mean(0));
        out.f1.push(mean(1));
        out.f2.push(mean(2));
        out.f3.push(mean(3));
        out.phi1.push(mean(4));
        out.phi2.push(mean(5));
    }
    Ok(out)
}
