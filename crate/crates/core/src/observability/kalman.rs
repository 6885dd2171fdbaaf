use faer::Mat;

use crate::error::{Error, Result};
use crate::lattice_ops::SparseOperator;

/// Relative singular-value cutoff used by the rank tests.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct RankOutcome {
    pub state_dim: usize,
    pub rank: usize,
    pub observable: bool,
    /// Nonincreasing; empty when the rank came from a Krylov basis.
    pub singular_values: Vec<f64>,
}

fn check_pair(a: &SparseOperator, h: &SparseOperator) -> Result<()> {
    if !a.is_square() {
        return Err(Error::dim(format!("generator must be square, got {}x{}", a.rows(), a.cols())));
    }
    if h.cols() != a.rows() {
        return Err(Error::dim(format!(
            "output map has {} columns but the state has dimension {}",
            h.cols(),
            a.rows()
        )));
    }
    Ok(())
}

/// Stacked `(h; hA; …; hA^{b-1})` with `b = min(n, max_blocks)`, shape `b m x n`.
///
/// Each block is the previous one times `A`, computed row by row as `Aᵀ r`.
pub fn kalman_observability_matrix(
    a: &SparseOperator,
    h: &SparseOperator,
    max_blocks: Option<usize>,
) -> Result<Mat<f64>> {
    check_pair(a, h)?;
    let (n, m) = (a.rows(), h.rows());
    let blocks = max_blocks.unwrap_or(n).min(n).max(1);
    let at = a.transpose();
    let mut out = Mat::zeros(blocks * m, n);
    let mut current: Vec<Vec<f64>> = (0..m)
        .map(|r| {
            let mut row = vec![0.0; n];
            for (c, v) in h.row(r) {
                row[c] = v;
            }
            row
        })
        .collect();
    for b in 0..blocks {
        for (r, row) in current.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                out[(b * m + r, c)] = v;
            }
        }
        if b + 1 < blocks {
            current = current.iter().map(|row| at.apply(row)).collect::<Result<_>>()?;
        }
    }
    Ok(out)
}

/// Numerical rank: singular values above `rel_tol * σ_max`.
pub fn rank_test(o: &Mat<f64>, rel_tol: f64) -> Result<RankOutcome> {
    if o.nrows() == 0 || o.ncols() == 0 {
        return Err(Error::param("rank test of an empty matrix"));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::param(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
    }
    let sv = o
        .singular_values()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let cutoff = rel_tol * sv[0];
    let rank = if sv[0] == 0.0 {
        0
    } else {
        sv.iter().filter(|&&s| s > cutoff).count()
    };
    Ok(RankOutcome {
        state_dim: o.ncols(),
        rank,
        observable: rank == o.ncols(),
        singular_values: sv,
    })
}

/// Rank of the Kalman matrix from an orthonormal basis of its row space.
///
/// The raw stacked powers lose all but the dominant modes long before
/// `n` blocks on lattice-sized systems, so this grows the Krylov space of
/// `Aᵀ` from the columns of `hᵀ` with two passes of Gram–Schmidt, dropping
/// any new direction whose component outside the current basis is below
/// `rel_tol` times its norm. The row space is the same as that of the
/// Kalman matrix, so the rank is too.
pub fn krylov_observable_rank(a: &SparseOperator, h: &SparseOperator, rel_tol: f64) -> Result<RankOutcome> {
    check_pair(a, h)?;
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::param(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
    }
    let n = a.rows();
    let at = a.transpose();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut frontier: Vec<Vec<f64>> = (0..h.rows())
        .map(|r| {
            let mut row = vec![0.0; n];
            for (c, v) in h.row(r) {
                row[c] = v;
            }
            row
        })
        .collect();
    while !frontier.is_empty() && basis.len() < n {
        let mut added = Vec::new();
        for mut w in frontier {
            let norm0 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm0 == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for q in &basis {
                    let d: f64 = q.iter().zip(&w).map(|(a, b)| a * b).sum();
                    w.iter_mut().zip(q).for_each(|(x, y)| *x -= d * y);
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > rel_tol * norm0 && basis.len() < n {
                w.iter_mut().for_each(|x| *x /= norm);
                basis.push(w.clone());
                added.push(w);
            }
        }
        frontier = added.iter().map(|q| at.apply(q)).collect::<Result<_>>()?;
    }
    Ok(RankOutcome {
        state_dim: n,
        rank: basis.len(),
        observable: basis.len() == n,
        singular_values: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(rows: usize, cols: usize, dense: &[f64]) -> SparseOperator {
        SparseOperator::from_dense(&Mat::from_fn(rows, cols, |i, j| dense[i * cols + j]))
    }

    #[test]
    fn identity_dynamics_with_one_output() {
        let o = kalman_observability_matrix(&SparseOperator::identity(2), &op(1, 2, &[1.0, 0.0]), None).unwrap();
        assert_eq!(o, Mat::from_fn(2, 2, |_, j| if j == 0 { 1.0 } else { 0.0 }));
        assert_eq!(rank_test(&o, DEFAULT_RANK_TOL).unwrap().rank, 1);
    }

    #[test]
    fn nilpotent_shift_is_observable() {
        let a = op(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let h = op(1, 2, &[1.0, 0.0]);
        let o = kalman_observability_matrix(&a, &h, None).unwrap();
        assert_eq!(o, Mat::<f64>::identity(2, 2));
        let r = rank_test(&o, DEFAULT_RANK_TOL).unwrap();
        assert!(r.observable);
        assert!(krylov_observable_rank(&a, &h, DEFAULT_RANK_TOL).unwrap().observable);
    }

    #[test]
    fn shape_is_nm_by_n() {
        let a = SparseOperator::identity(3);
        let h = op(1, 3, &[1.0, 1.0, 1.0]);
        let o = kalman_observability_matrix(&a, &h, None).unwrap();
        assert_eq!((o.nrows(), o.ncols()), (3, 3));
        assert_eq!(kalman_observability_matrix(&a, &h, Some(2)).unwrap().nrows(), 2);
        assert!(kalman_observability_matrix(&a, &op(1, 2, &[1.0, 0.0]), None).is_err());
    }

    #[test]
    fn rank_of_outer_product() {
        let m = Mat::from_fn(4, 3, |i, j| (i + 1) as f64 * (j as f64 - 0.5));
        assert_eq!(rank_test(&m, 1e-10).unwrap().rank, 1);
        assert_eq!(rank_test(&Mat::<f64>::identity(5, 5), 1e-10).unwrap().rank, 5);
        assert!(rank_test(&Mat::<f64>::zeros(0, 2), 1e-10).is_err());
    }
}
