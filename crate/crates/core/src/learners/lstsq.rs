//! Streaming least squares.
//!
//! Rows of `[X | 1 | Y]` are folded into an upper-triangular factor block by
//! block (TSQR), so memory stays at one block plus the factor regardless of
//! the sample count. The weights then come from an SVD of the leading
//! triangle, which gives the minimum-norm solution when the design is rank
//! deficient.

use std::cmp::Ordering;
use std::hash::{Hash, Hasher};

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::DesignSource;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LstsqOptions {
    /// Penalty on the squared Frobenius norm of the weights (never the bias).
    pub ridge: f64,
    pub bias: bool,
    /// Rows folded per factorization; 0 picks a size from the column count.
    pub block_rows: usize,
}

impl Default for LstsqOptions {
    fn default() -> Self {
        LstsqOptions {
            ridge: 0.0,
            bias: true,
            block_rows: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstsqReport {
    pub samples: usize,
    pub unknowns_per_output: usize,
    pub rank: usize,
    pub rank_deficient: bool,
    pub largest_singular_value: f64,
    pub smallest_singular_value: f64,
    /// `Σ‖W x + b - y‖²` over the training rows (ridge rows excluded).
    pub residual_sum_squares: f64,
}

#[derive(Clone, Debug)]
pub struct LstsqFit {
    /// `out x in`
    pub weights: Mat<f64>,
    pub bias: Option<Vec<f64>>,
    pub report: LstsqReport,
}

fn row_hash(features: &[f64], targets: &[f64]) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for v in features.iter().chain(targets) {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

fn compare_rows(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> Ordering {
    let bits = |r: &(Vec<f64>, Vec<f64>)| r.0.iter().chain(&r.1).map(|v| v.to_bits()).collect::<Vec<_>>();
    bits(a).cmp(&bits(b))
}

/// Sample order that depends only on the multiset of rows.
fn canonical_order(source: &dyn DesignSource) -> Vec<usize> {
    let (p, q) = (source.n_features(), source.n_targets());
    let mut keyed: Vec<(u64, usize)> = (0..source.n_samples())
        .into_par_iter()
        .map_init(
            || (vec![0.0; p], vec![0.0; q]),
            |(x, y), i| {
                source.fill(i, x, y);
                (row_hash(x, y), i)
            },
        )
        .collect();
    keyed.sort_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| {
            let load = |i: usize| {
                let mut r = (vec![0.0; p], vec![0.0; q]);
                source.fill(i, &mut r.0, &mut r.1);
                r
            };
            compare_rows(&load(a.1), &load(b.1))
        })
    });
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Minimise `Σ‖W x + b - y‖² + ridge ‖W‖²_F` over the rows of `source`.
///
/// Rows are processed in a canonical order, so permuting the samples gives
/// a bit-identical fit (for a fixed thread count).
pub fn fit_least_squares(source: &dyn DesignSource, opts: &LstsqOptions) -> Result<LstsqFit> {
    let n = source.n_samples();
    let (p, q) = (source.n_features(), source.n_targets());
    if n == 0 || p == 0 || q == 0 {
        return Err(Error::param("least squares needs at least one sample with non-empty rows"));
    }
    if !(opts.ridge >= 0.0 && opts.ridge.is_finite()) {
        return Err(Error::param(format!("ridge must be finite and >= 0, got {}", opts.ridge)));
    }
    let nw = p + usize::from(opts.bias);
    let cols = nw + q;
    let block = if opts.block_rows == 0 {
        (4 * cols).max(256)
    } else {
        opts.block_rows
    };

    let order = canonical_order(source);
    let mut r_factor: Mat<f64> = Mat::zeros(0, cols);
    let mut rows = vec![0.0; block * cols];
    for chunk in order.chunks(block) {
        let filled = &mut rows[..chunk.len() * cols];
        filled.par_chunks_mut(cols).zip(chunk.par_iter()).for_each(|(row, &i)| {
            let (x, rest) = row.split_at_mut(p);
            let (one, y) = rest.split_at_mut(nw - p);
            source.fill(i, x, y);
            one.fill(1.0);
        });
        if filled.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("design contains non-finite values".into()));
        }
        let prev = r_factor.nrows();
        let stacked = Mat::from_fn(prev + chunk.len(), cols, |i, j| {
            if i < prev {
                r_factor[(i, j)]
            } else {
                filled[(i - prev) * cols + j]
            }
        });
        r_factor = stacked.qr().thin_R().to_owned();
    }
    if opts.ridge > 0.0 {
        let s = opts.ridge.sqrt();
        let prev = r_factor.nrows();
        let stacked = Mat::from_fn(prev + p, cols, |i, j| {
            if i < prev {
                r_factor[(i, j)]
            } else if i - prev == j {
                s
            } else {
                0.0
            }
        });
        r_factor = stacked.qr().thin_R().to_owned();
    }

    // Pad to a square leading block when there are fewer rows than unknowns.
    let lead = Mat::from_fn(nw, nw, |i, j| if i < r_factor.nrows() { r_factor[(i, j)] } else { 0.0 });
    let rhs = Mat::from_fn(nw, q, |i, j| {
        if i < r_factor.nrows() {
            r_factor[(i, nw + j)]
        } else {
            0.0
        }
    });
    let svd = lead
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD of the least-squares factor failed: {e:?}")))?;
    let sv = svd.S().column_vector();
    let smax = sv[0];
    let cutoff = f64::EPSILON * n.max(nw) as f64 * smax;
    let rank = (0..nw).filter(|&i| sv[i] > cutoff).count();
    // x = V Σ⁺ Uᵀ rhs
    let ut_rhs = svd.U().transpose() * &rhs;
    let scaled = Mat::from_fn(nw, q, |i, j| if i < rank { ut_rhs[(i, j)] / sv[i] } else { 0.0 });
    let solution = svd.V() * &scaled;

    let misfit = &lead * &solution - &rhs;
    let mut rss = misfit.squared_norm_l2();
    for i in nw..r_factor.nrows() {
        for j in nw..cols {
            rss += r_factor[(i, j)] * r_factor[(i, j)];
        }
    }
    if opts.ridge > 0.0 {
        // The factor also carries the penalty; remove it from the reported residual.
        rss = (rss - opts.ridge * Mat::from_fn(p, q, |i, j| solution[(i, j)]).squared_norm_l2()).max(0.0);
    }

    let weights = Mat::from_fn(q, p, |o, i| solution[(i, o)]);
    let bias = opts.bias.then(|| (0..q).map(|o| solution[(p, o)]).collect());
    Ok(LstsqFit {
        weights,
        bias,
        report: LstsqReport {
            samples: n,
            unknowns_per_output: nw,
            rank,
            rank_deficient: rank < nw,
            largest_singular_value: smax,
            smallest_singular_value: sv[nw - 1],
            residual_sum_squares: rss,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::design::PairDesign;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn synthetic(n: usize, p: usize, q: usize, noise: f64, seed: u64) -> (PairDesign, Mat<f64>, Vec<f64>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let w = Mat::from_fn(q, p, |_, _| rng.random_range(-1.0..1.0));
        let b: Vec<f64> = (0..q).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..n {
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..q)
                .map(|o| b[o] + (0..p).map(|i| w[(o, i)] * x[i]).sum::<f64>() + noise * rng.random_range(-1.0..1.0))
                .collect();
            xs.push(x);
            ys.push(y);
        }
        (PairDesign::new(xs, ys).unwrap(), w, b)
    }

    #[test]
    fn recovers_exact_generator() {
        let (d, w, b) = synthetic(300, 12, 3, 0.0, 1);
        let opts = LstsqOptions {
            block_rows: 37,
            ..Default::default()
        };
        let fit = fit_least_squares(&d, &opts).unwrap();
        assert!(!fit.report.rank_deficient);
        assert!(fit.report.residual_sum_squares < 1e-20);
        for o in 0..3 {
            assert!((fit.bias.as_ref().unwrap()[o] - b[o]).abs() < 1e-10);
            for i in 0..12 {
                assert!((fit.weights[(o, i)] - w[(o, i)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn huge_ridge_shrinks_weights() {
        let (d, _, _) = synthetic(100, 5, 2, 0.1, 2);
        let fit = fit_least_squares(
            &d,
            &LstsqOptions {
                ridge: 1e12,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(fit.weights.norm_l2() < 1e-8);
    }

    #[test]
    fn duplicated_column_gives_minimum_norm() {
        // y = 2 x, with x supplied twice: the minimum-norm split is (1, 1).
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, i as f64]).collect();
        let ys: Vec<Vec<f64>> = (0..20).map(|i| vec![2.0 * i as f64]).collect();
        let d = PairDesign::new(xs, ys).unwrap();
        let fit = fit_least_squares(
            &d,
            &LstsqOptions {
                bias: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(fit.report.rank_deficient);
        assert_eq!(fit.report.rank, 1);
        assert!((fit.weights[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((fit.weights[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fewer_samples_than_unknowns() {
        let (d, _, _) = synthetic(3, 8, 1, 0.0, 3);
        let fit = fit_least_squares(&d, &LstsqOptions::default()).unwrap();
        assert!(fit.report.rank_deficient);
        assert!(fit.report.residual_sum_squares < 1e-20);
    }

    #[test]
    fn permutation_gives_identical_bits() {
        let (d, _, _) = synthetic(120, 6, 2, 0.05, 4);
        let mut perm = d.clone();
        perm.inputs.reverse();
        perm.targets.reverse();
        perm.inputs.swap(3, 77);
        perm.targets.swap(3, 77);
        let opts = LstsqOptions {
            block_rows: 16,
            ..Default::default()
        };
        let a = fit_least_squares(&d, &opts).unwrap();
        let b = fit_least_squares(&perm, &opts).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.bias, b.bias);
    }
}
