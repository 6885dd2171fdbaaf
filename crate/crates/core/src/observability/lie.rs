//! Finite-difference Lie-derivative observability matrix along a trajectory.
//!
//! The `l`-th time derivative of the tokens at `x_t` is approximated by the
//! forward difference `Δ^l y_t / Δt^l = Σ_j w_{l,j} h(x_{t+j}) / Δt^l`. Its
//! gradient with respect to `x_t` is `Σ_j w_{l,j} h J_j / Δt^l`, where
//! `J_j = ∂x_{t+j}/∂x_t` is the product of one-step Jacobians of the
//! integrator. Stacking the gradients for `l = 0..orders` gives a square
//! matrix when `orders * tokens = state dimension`; its log-determinant is
//! the diagnostic.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice_ops::build_line_tokenizer;
use crate::solvers::{Equation, Kse1dStepper, Trajectory};

/// Relative singular-value cutoff for the per-time rank check.
const RANK_TOL: f64 = 1e-10;
/// Times processed per batch of precomputed step Jacobians.
const BATCH: usize = 256;

/// Per-time log-determinant series.
#[derive(Clone, Debug, PartialEq)]
pub struct LieLogDet {
    /// Frame index of each entry.
    pub times: Vec<usize>,
    /// `log|det|`, or `-inf` where the matrix is numerically rank deficient.
    pub log_abs_det: Vec<f64>,
    /// `log|det|` as computed, even when rank deficient.
    pub raw_log_abs_det: Vec<f64>,
    /// Sign of the determinant (0 for an exactly singular factorization).
    pub sign: Vec<i8>,
    pub rank: Vec<usize>,
    pub full_rank: Vec<bool>,
    /// Centered rolling mean of `log_abs_det` over `window` entries.
    pub rolling_mean: Vec<f64>,
    pub dimension: usize,
}

impl LieLogDet {
    /// Fraction of entries from `start` on that are numerically full rank.
    pub fn full_rank_fraction(&self, start: usize) -> f64 {
        let tail = &self.full_rank[start.min(self.full_rank.len())..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().filter(|&&f| f).count() as f64 / tail.len() as f64
    }
}

/// Binomial forward-difference weights `(-1)^{l-j} C(l, j)`, `j = 0..=l`.
pub fn forward_difference_weights(order: usize) -> Vec<f64> {
    let mut c = vec![1.0f64];
    for _ in 0..order {
        let mut next = vec![0.0; c.len() + 1];
        for (j, v) in c.iter().enumerate() {
            next[j] -= v;
            next[j + 1] += v;
        }
        c = next;
    }
    c
}

fn mul(a: faer::MatRef<'_, f64>, b: faer::MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    out
}

/// Sign and log-magnitude of the determinant from an LU factorization.
fn signed_logdet(m: &Mat<f64>) -> (i8, f64) {
    let lu = m.partial_piv_lu();
    let u = lu.U();
    let mut sign: i8 = 1;
    let mut log = 0.0;
    for i in 0..m.nrows() {
        let d = u[(i, i)];
        if d == 0.0 {
            return (0, f64::NEG_INFINITY);
        }
        if d < 0.0 {
            sign = -sign;
        }
        log += d.abs().ln();
    }
    let (fwd, _) = lu.P().arrays();
    let mut seen = vec![false; fwd.len()];
    let mut transpositions = 0;
    for start in 0..fwd.len() {
        let mut len = 0usize;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = fwd[i];
            len += 1;
        }
        transpositions += len.saturating_sub(1);
    }
    if transpositions % 2 == 1 {
        sign = -sign;
    }
    (sign, log)
}

/// Rank with each derivative block scaled to unit Frobenius norm.
///
/// Row scaling leaves the rank unchanged but keeps the `1/Δt^l` factors
/// from swamping the lower orders in the relative cutoff.
fn balanced_rank(m: &Mat<f64>, block: usize) -> usize {
    let n = m.nrows();
    let mut scaled = m.clone();
    for start in (0..n).step_by(block) {
        let rows = block.min(n - start);
        let norm = scaled.as_ref().subrows(start, rows).norm_l2();
        if norm > 0.0 {
            for i in start..start + rows {
                for j in 0..m.ncols() {
                    scaled[(i, j)] /= norm;
                }
            }
        }
    }
    match scaled.singular_values() {
        Ok(sv) if sv[0] > 0.0 => sv.iter().filter(|&&s| s > RANK_TOL * sv[0]).count(),
        _ => 0,
    }
}

fn centered_mean(values: &[f64], window: usize) -> Vec<f64> {
    let n = values.len();
    let w = window.max(1);
    let back = (w - 1) / 2;
    let fwd = w / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + fwd + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Log-determinant series from an output matrix and per-time step Jacobians.
///
/// `jacobian(t)` must return `∂x_{t+1}/∂x_t`; entries are produced for
/// `t = 0..count`, each using Jacobians `t .. t + orders - 1`.
pub fn lie_logdet_from_jacobians(
    h: &Mat<f64>,
    jacobian: &(dyn Fn(usize) -> Result<Mat<f64>> + Sync),
    count: usize,
    dt: f64,
    orders: usize,
    window: usize,
) -> Result<LieLogDet> {
    let (m, n) = (h.nrows(), h.ncols());
    if orders == 0 || m * orders != n {
        return Err(Error::dim(format!(
            "{orders} derivative orders of {m} outputs do not make a square matrix for state dimension {n}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::param(format!("dt must be > 0, got {dt}")));
    }
    let weights: Vec<Vec<f64>> = (0..orders).map(forward_difference_weights).collect();
    let span = orders - 1;

    let mut entries = Vec::with_capacity(count);
    let mut start = 0;
    while start < count {
        let stop = (start + BATCH).min(count);
        let jacs: Vec<Mat<f64>> = (start..stop + span)
            .into_par_iter()
            .map(|t| jacobian(t))
            .collect::<Result<_>>()?;
        let batch: Vec<(i8, f64, usize)> = (start..stop)
            .into_par_iter()
            .map(|t| {
                let local = &jacs[t - start..t - start + span];
                // outputs[j] = h J_j = h M_{t+j-1} ... M_t
                let mut outputs = vec![h.clone()];
                for j in 1..orders {
                    let mut x = h.clone();
                    for s in (0..j).rev() {
                        x = mul(x.as_ref(), local[s].as_ref());
                    }
                    outputs.push(x);
                }
                let mut o = Mat::<f64>::zeros(n, n);
                for (l, w) in weights.iter().enumerate() {
                    let scale = dt.powi(-(l as i32));
                    for (j, &wj) in w.iter().enumerate() {
                        let src = &outputs[j];
                        for c in 0..n {
                            for r in 0..m {
                                o[(l * m + r, c)] += scale * wj * src[(r, c)];
                            }
                        }
                    }
                }
                let (sign, log) = signed_logdet(&o);
                (sign, log, balanced_rank(&o, m))
            })
            .collect();
        entries.extend(batch);
        start = stop;
    }

    let full_rank: Vec<bool> = entries.iter().map(|e| e.2 == n).collect();
    let log_abs_det: Vec<f64> = entries
        .iter()
        .zip(&full_rank)
        .map(|(e, &f)| if f { e.1 } else { f64::NEG_INFINITY })
        .collect();
    Ok(LieLogDet {
        times: (0..count).collect(),
        rolling_mean: centered_mean(&log_abs_det, window),
        log_abs_det,
        raw_log_abs_det: entries.iter().map(|e| e.1).collect(),
        sign: entries.iter().map(|e| e.0).collect(),
        rank: entries.iter().map(|e| e.2).collect(),
        full_rank,
        dimension: n,
    })
}

/// Dense circulant matrix of a Fourier multiplier: `F⁻¹ diag(mult) F`.
fn circulant(stepper: &mut Kse1dStepper, mult: &[Complex64]) -> Mat<f64> {
    let n = mult.len();
    let col = stepper.fft().inverse_real(mult);
    Mat::from_fn(n, n, |i, j| col[(i + n - j) % n])
}

/// Dense Jacobian of one ETDRK2 step of the 1D equation, in physical space.
struct StepJacobian {
    stepper: std::sync::Mutex<Kse1dStepper>,
    decay: Mat<f64>,
    phi1_dx: Mat<f64>,
    phi2_dx: Mat<f64>,
}

impl StepJacobian {
    fn new(mut stepper: Kse1dStepper) -> Self {
        let c = stepper.coefficients().clone();
        let ik = stepper.wavenumbers().to_vec();
        let e: Vec<Complex64> = c.e.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let p1: Vec<Complex64> = c.phi1.iter().zip(&ik).map(|(&p, &k)| p * k).collect();
        let p2: Vec<Complex64> = c.phi2.iter().zip(&ik).map(|(&p, &k)| p * k).collect();
        StepJacobian {
            decay: circulant(&mut stepper, &e),
            phi1_dx: circulant(&mut stepper, &p1),
            phi2_dx: circulant(&mut stepper, &p2),
            stepper: std::sync::Mutex::new(stepper),
        }
    }

    /// With `N(u) = -½ ∂ₓ(u²)`, the step is `a = E u + Φ₁ N(u)`,
    /// `u' = a + Φ₂ (N(a) - N(u))`, and `dN(u) = -∂ₓ diag(u)`.
    fn at(&self, u: &[f64]) -> Mat<f64> {
        let n = u.len();
        let stage = {
            let mut st = self.stepper.lock().expect("stepper lock");
            let v = st.fft().forward_real(u);
            let nv = st.nonlinear(&v);
            let c = st.coefficients();
            let a: Vec<Complex64> = (0..n).map(|k| c.e[k] * v[k] + c.phi1[k] * nv[k]).collect();
            st.fft().inverse_real(&a)
        };
        let ja = Mat::from_fn(n, n, |i, j| self.decay[(i, j)] - self.phi1_dx[(i, j)] * u[j]);
        let scaled = Mat::from_fn(n, n, |i, j| stage[i] * ja[(i, j)]);
        let corr = mul(self.phi2_dx.as_ref(), scaled.as_ref());
        Mat::from_fn(n, n, |i, j| ja[(i, j)] - corr[(i, j)] + self.phi2_dx[(i, j)] * u[j])
    }
}

/// Log-determinant diagnostic along a stored 1D KSE trajectory.
///
/// Tokens average non-overlapping windows of `patch` points; `orders`
/// derivative orders (0 through `orders - 1`) are stacked, so
/// `orders * n / patch` must equal `n`. The integrator is rebuilt from the
/// trajectory metadata, which must come from an unskipped 1D run.
/// Entries exist for `t = 0 ..= len - orders`.
pub fn empirical_lie_logdet(traj: &Trajectory, patch: usize, orders: usize, window: usize) -> Result<LieLogDet> {
    let Equation::Kse1d { domain_length } = traj.equation else {
        return Err(Error::param("the log-det diagnostic needs a 1D KSE trajectory"));
    };
    if traj.skip != 1 {
        return Err(Error::param("the log-det diagnostic needs every integrator step stored (skip = 1)"));
    }
    let n = traj.layout.len();
    if traj.len() < orders {
        return Err(Error::param(format!(
            "trajectory of {} frames is too short for {orders} derivative orders",
            traj.len()
        )));
    }
    let h = build_line_tokenizer(n, patch)?.to_dense();
    let jac = StepJacobian::new(Kse1dStepper::new(n, domain_length, traj.dt)?);
    let frames = &traj.frames;
    let count = traj.len() + 1 - orders;
    lie_logdet_from_jacobians(&h, &|t| Ok(jac.at(&frames[t])), count, traj.dt, orders, window)
}
