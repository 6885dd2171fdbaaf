//! Eigenvector test: the pair is observable iff no eigenvector of `A`
//! lies in the kernel of `h`.

use faer::{c64, Mat, Side};

use super::FailingMode;
use crate::error::{Error, Result};
use crate::lattice_ops::SparseOperator;

/// Largest state dimension handled by the dense eigensolvers.
pub const DENSE_LIMIT: usize = 4096;

/// Eigenvalues closer than this (relative to the spectral radius) share an eigenspace.
const CLUSTER_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct EigenCheck {
    pub eigenvalue_re: f64,
    pub eigenvalue_im: f64,
    pub multiplicity: usize,
    pub min_output_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HautusOutcome {
    pub state_dim: usize,
    pub tol: f64,
    pub checks: Vec<EigenCheck>,
    pub failing: Vec<FailingMode>,
    pub min_output_norm: f64,
    /// Eigenspaces examined and eigenspaces found; they differ when a budget applies.
    pub checked: usize,
    pub total: usize,
    /// `"symmetric"`, `"wave"` or `"general"`.
    pub method: &'static str,
}

impl HautusOutcome {
    /// True when every eigenspace was examined and none failed.
    pub fn observable(&self) -> bool {
        self.failing.is_empty() && self.checked == self.total
    }
}

/// Smallest `‖M v‖` over unit `v`, given the singular values of the `m x c` matrix `M`.
fn min_gain(sv: &[f64], cols: usize) -> f64 {
    if cols > sv.len() {
        0.0
    } else {
        sv.last().copied().unwrap_or(0.0)
    }
}

/// Group sorted real eigenvalues into runs whose neighbours are within `tol`.
fn real_clusters(values: &[f64], tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > tol {
            out.push((start, i));
            start = i;
        }
    }
    out
}

struct Spaces {
    /// `(eigenvalue, multiplicity, min ‖h v‖)` per eigenspace, in checking order.
    checks: Vec<(c64, usize, f64)>,
    total: usize,
}

fn symmetric_spaces(a: &Mat<f64>, h: &Mat<f64>, budget: usize) -> Result<Spaces> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..a.nrows()).map(|i| s[i]).collect();
    let radius = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut clusters = real_clusters(&values, CLUSTER_TOL * radius.max(f64::MIN_POSITIVE));
    let total = clusters.len();
    clusters.sort_by(|x, y| values[x.0].abs().total_cmp(&values[y.0].abs()));
    clusters.truncate(budget);
    let u = evd.U();
    let mut checks = Vec::with_capacity(clusters.len());
    for (lo, hi) in clusters {
        let hv = h * u.subcols(lo, hi - lo);
        let sv = hv
            .singular_values()
            .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
        let mean = values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        checks.push((c64::new(mean, 0.0), hi - lo, min_gain(&sv, hi - lo)));
    }
    Ok(Spaces { checks, total })
}

fn general_spaces(a: &Mat<f64>, h: &Mat<f64>, budget: usize) -> Result<Spaces> {
    let n = a.nrows();
    let evd = a
        .eigen()
        .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<c64> = (0..n).map(|i| s[i]).collect();
    let radius = values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let tol = CLUSTER_TOL * radius.max(f64::MIN_POSITIVE);
    let mut assigned = vec![false; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let members: Vec<usize> = (i..n).filter(|&j| !assigned[j] && (values[j] - values[i]).norm() <= tol).collect();
        members.iter().for_each(|&j| assigned[j] = true);
        clusters.push(members);
    }
    let total = clusters.len();
    clusters.sort_by(|x, y| values[x[0]].norm().total_cmp(&values[y[0]].norm()));
    clusters.truncate(budget);

    let u = evd.U();
    let hc = Mat::from_fn(h.nrows(), h.ncols(), |i, j| c64::new(h[(i, j)], 0.0));
    let mut checks = Vec::with_capacity(clusters.len());
    for members in clusters {
        let vecs = Mat::from_fn(n, members.len(), |i, j| u[(i, members[j])]);
        // Orthonormal basis of the computed eigenvectors; defective
        // eigenvalues return nearly parallel vectors, which collapse here.
        let svd = vecs
            .thin_svd()
            .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
        let sv = svd.S().column_vector();
        let keep = (0..members.len()).filter(|&k| sv[k].re > 1e-8 * sv[0].re).count().max(1);
        let basis = svd.U().subcols(0, keep);
        let gains = (&hc * basis)
            .singular_values()
            .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
        let mean = members.iter().map(|&k| values[k]).sum::<c64>() / members.len() as f64;
        checks.push((mean, keep, min_gain(&gains, keep)));
    }
    Ok(Spaces { checks, total })
}

/// If `a` is `[[0, I], [B, 0]]` and `h` reads only the first half, return `(B, h_u)`.
fn split_wave(a: &Mat<f64>, h: &Mat<f64>) -> Option<(Mat<f64>, Mat<f64>)> {
    let n2 = a.nrows();
    if n2 % 2 != 0 || n2 == 0 {
        return None;
    }
    let n = n2 / 2;
    for i in 0..n {
        for j in 0..n2 {
            let want = if j == n + i { 1.0 } else { 0.0 };
            if a[(i, j)] != want {
                return None;
            }
        }
        for j in n..n2 {
            if a[(n + i, j)] != 0.0 {
                return None;
            }
        }
    }
    if (0..h.nrows()).any(|r| (n..n2).any(|c| h[(r, c)] != 0.0)) {
        return None;
    }
    Some((
        Mat::from_fn(n, n, |i, j| a[(n + i, j)]),
        Mat::from_fn(h.nrows(), n, |i, j| h[(i, j)]),
    ))
}

fn is_symmetric(a: &Mat<f64>) -> bool {
    let n = a.nrows();
    let scale = (0..n).fold(0.0f64, |m, i| (0..n).fold(m, |m, j| m.max(a[(i, j)].abs())));
    (0..n).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= 1e-13 * scale.max(1.0)))
}

/// Hautus test of `(A, h)` with an absolute threshold `tol` on `min ‖h v‖`.
///
/// Symmetric generators use a symmetric eigensolver; wave generators
/// `[[0, I], [B, 0]]` observed through the amplitude reduce to `(B, h_u)`
/// with eigenvectors `(w, μ w)`, `μ² = λ(B)`; anything else goes through a
/// general dense eigensolver. `eig_budget` caps the number of eigenspaces
/// examined (slowest modes first) and is reflected in the coverage counts.
pub fn hautus_test(a: &SparseOperator, h: &SparseOperator, tol: f64, eig_budget: Option<usize>) -> Result<HautusOutcome> {
    if !a.is_square() || h.cols() != a.rows() {
        return Err(Error::dim(format!(
            "need square A and h with matching columns, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            h.rows(),
            h.cols()
        )));
    }
    if a.rows() > DENSE_LIMIT {
        return Err(Error::param(format!(
            "state dimension {} exceeds the dense eigensolver limit {DENSE_LIMIT}",
            a.rows()
        )));
    }
    if !(tol >= 0.0) {
        return Err(Error::param(format!("tol must be >= 0, got {tol}")));
    }
    let budget = eig_budget.unwrap_or(usize::MAX);
    let (ad, hd) = (a.to_dense(), h.to_dense());

    let (checks, total, method) = if let Some((b, hu)) = split_wave(&ad, &hd) {
        let inner = if is_symmetric(&b) {
            symmetric_spaces(&b, &hu, budget)?
        } else {
            general_spaces(&b, &hu, budget)?
        };
        let mut checks = Vec::new();
        let mut zero_modes = 0;
        for (lambda, mult, gain) in inner.checks {
            let mu = lambda.sqrt();
            let scale = (1.0 + mu.norm_sqr()).sqrt();
            checks.push((mu, mult, gain / scale));
            if mu.norm() > 0.0 {
                checks.push((-mu, mult, gain / scale));
            } else {
                zero_modes += 1;
            }
        }
        // `±μ` are distinct eigenvalues unless `μ = 0`.
        (checks, 2 * inner.total - zero_modes, "wave")
    } else if is_symmetric(&ad) {
        let s = symmetric_spaces(&ad, &hd, budget)?;
        (s.checks, s.total, "symmetric")
    } else {
        let s = general_spaces(&ad, &hd, budget)?;
        (s.checks, s.total, "general")
    };

    let checks: Vec<EigenCheck> = checks
        .into_iter()
        .map(|(l, m, g)| EigenCheck {
            eigenvalue_re: l.re,
            eigenvalue_im: l.im,
            multiplicity: m,
            min_output_norm: g,
        })
        .collect();
    let failing = checks
        .iter()
        .filter(|c| c.min_output_norm < tol)
        .map(|c| FailingMode {
            eigenvalue_re: c.eigenvalue_re,
            eigenvalue_im: c.eigenvalue_im,
            multiplicity: c.multiplicity,
            min_output_norm: c.min_output_norm,
        })
        .collect();
    let min_output_norm = checks.iter().fold(f64::INFINITY, |m, c| m.min(c.min_output_norm));
    let checked = checks.len();
    Ok(HautusOutcome {
        state_dim: a.rows(),
        tol,
        checks,
        failing,
        min_output_norm,
        checked,
        total,
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(rows: usize, cols: usize, dense: &[f64]) -> SparseOperator {
        SparseOperator::from_dense(&Mat::from_fn(rows, cols, |i, j| dense[i * cols + j]))
    }

    #[test]
    fn identity_output_never_fails() {
        let a = op(3, 3, &[1.0, 2.0, 0.0, 0.0, 3.0, 1.0, 0.0, 0.0, -1.0]);
        let out = hautus_test(&a, &SparseOperator::identity(3), 1e-8, None).unwrap();
        assert_eq!(out.method, "general");
        assert!(out.observable());
        assert_eq!(out.checked, 3);
    }

    #[test]
    fn diagonal_with_blind_output_fails_on_that_mode() {
        let a = op(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let h = op(1, 2, &[1.0, 0.0]);
        let out = hautus_test(&a, &h, 1e-8, None).unwrap();
        assert_eq!(out.method, "symmetric");
        assert_eq!(out.failing.len(), 1);
        assert_eq!(out.failing[0].eigenvalue_re, -2.0);
    }

    #[test]
    fn repeated_eigenvalue_with_one_output_fails() {
        // Two-dimensional eigenspace, one output: some direction is invisible.
        let a = SparseOperator::identity(2);
        let h = op(1, 2, &[1.0, 1.0]);
        let out = hautus_test(&a, &h, 1e-8, None).unwrap();
        assert_eq!(out.failing.len(), 1);
        assert_eq!(out.failing[0].multiplicity, 2);
    }

    #[test]
    fn jordan_block_is_observable_from_the_top() {
        let a = op(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let h = op(1, 2, &[1.0, 0.0]);
        assert!(hautus_test(&a, &h, 1e-8, None).unwrap().observable());
        let blind = op(1, 2, &[0.0, 1.0]);
        assert!(!hautus_test(&a, &blind, 1e-8, None).unwrap().observable());
    }

    #[test]
    fn budget_limits_coverage() {
        let a = op(3, 3, &[-1.0, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, -3.0]);
        let out = hautus_test(&a, &SparseOperator::identity(3), 1e-8, Some(2)).unwrap();
        assert_eq!((out.checked, out.total), (2, 3));
        assert!(!out.observable());
    }
}
