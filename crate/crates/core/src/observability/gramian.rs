//! Finite-horizon observability Gramian and the linear left inverse of the
//! output map built from it.

use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Largest state dimension accepted by the dense Gramian routines.
pub const GRAMIAN_DENSE_LIMIT: usize = 256;
/// Gramians with a larger eigenvalue ratio are treated as singular.
pub const GRAMIAN_CONDITION_LIMIT: f64 = 1e12;

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &Mat<f64>) -> Mat<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    // Scale until ‖A‖₁ / 2^s <= 1/2; 20 terms then leave a remainder far below eps.
    let s = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a * faer::Scale(0.5f64.powi(s));
    let mut term = Mat::<f64>::identity(n, n);
    let mut sum = Mat::<f64>::identity(n, n);
    for k in 1..=20 {
        term = &term * &scaled * faer::Scale(1.0 / k as f64);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

fn check(a: &Mat<f64>, h: &Mat<f64>, horizon: f64, steps: usize) -> Result<()> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n || h.ncols() != n || h.nrows() == 0 {
        return Err(Error::dim("need square A and h with matching columns"));
    }
    if n > GRAMIAN_DENSE_LIMIT {
        return Err(Error::param(format!(
            "state dimension {n} exceeds the dense Gramian limit {GRAMIAN_DENSE_LIMIT}"
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param(format!("horizon must be > 0, got {horizon}")));
    }
    if steps < 2 || steps % 2 != 0 {
        return Err(Error::param(format!(
            "Simpson quadrature needs an even number of steps >= 2, got {steps}"
        )));
    }
    Ok(())
}

fn simpson_weight(k: usize, steps: usize, ds: f64) -> f64 {
    let w = if k == 0 || k == steps {
        1.0
    } else if k % 2 == 1 {
        4.0
    } else {
        2.0
    };
    w * ds / 3.0
}

/// `Q(T) = ∫₀ᵀ e^{Aᵀs} hᵀh e^{As} ds` by composite Simpson over `steps` intervals.
///
/// Nodes use powers of `e^{AΔs}`, so only one exponential is formed.
pub fn observability_gramian(a: &Mat<f64>, h: &Mat<f64>, horizon: f64, steps: usize) -> Result<Mat<f64>> {
    check(a, h, horizon, steps)?;
    let n = a.nrows();
    let ds = horizon / steps as f64;
    let step = expm(&(a * faer::Scale(ds)));
    let hth = h.transpose() * h;
    let mut e = Mat::<f64>::identity(n, n);
    let mut q = Mat::<f64>::zeros(n, n);
    for k in 0..=steps {
        let w = simpson_weight(k, steps, ds);
        q += (e.transpose() * &hth * &e) * faer::Scale(w);
        if k < steps {
            e = &step * &e;
        }
    }
    // Symmetrise away rounding.
    Ok(Mat::from_fn(n, n, |i, j| 0.5 * (q[(i, j)] + q[(j, i)])))
}

/// Recover `x0` from outputs `y(t_k) = h e^{A t_k} x0` sampled at
/// `t_k = k T / (len - 1)`, via `Q(T)⁻¹ ∫ e^{Aᵀt} hᵀ y(t) dt`.
///
/// The integral uses the same Simpson rule as the Gramian, so noise-free
/// samples are reconstructed up to rounding. Gramians whose eigenvalue
/// ratio exceeds [`GRAMIAN_CONDITION_LIMIT`] (or that are not positive
/// definite) are refused as not observable.
pub fn linear_reconstruct_initial_state(
    a: &Mat<f64>,
    h: &Mat<f64>,
    outputs: &[Vec<f64>],
    horizon: f64,
) -> Result<Vec<f64>> {
    let steps = outputs.len().saturating_sub(1);
    check(a, h, horizon, steps)?;
    let (n, m) = (a.nrows(), h.nrows());
    if outputs.iter().any(|y| y.len() != m) {
        return Err(Error::dim(format!("every output sample must have length {m}")));
    }
    let q = observability_gramian(a, h, horizon, steps)?;
    let evd = q
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Gramian eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let (lo, hi) = (s[0], s[n - 1]);
    if !(lo > 0.0) || hi / lo > GRAMIAN_CONDITION_LIMIT {
        return Err(Error::NotObservable(format!(
            "Gramian eigenvalues span [{lo:e}, {hi:e}], beyond the condition limit {GRAMIAN_CONDITION_LIMIT:e}"
        )));
    }

    let ds = horizon / steps as f64;
    let step = expm(&(a * faer::Scale(ds)));
    let ht = h.transpose();
    let mut e = Mat::<f64>::identity(n, n);
    let mut rhs = Mat::<f64>::zeros(n, 1);
    for (k, y) in outputs.iter().enumerate() {
        let yk = Mat::from_fn(m, 1, |i, _| y[i]);
        rhs += (e.transpose() * (&ht * &yk)) * faer::Scale(simpson_weight(k, steps, ds));
        if k < steps {
            e = &step * &e;
        }
    }
    let u = evd.U();
    let coeff = u.transpose() * &rhs;
    let scaled = Mat::from_fn(n, 1, |i, _| coeff[(i, 0)] / s[i]);
    let x = u * &scaled;
    Ok((0..n).map(|i| x[(i, 0)]).collect())
}
