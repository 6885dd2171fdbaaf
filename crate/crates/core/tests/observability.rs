use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use tokenobs::dataset::presets::{CONDUCTIVITY_SEED, DEFAULT_CONDUCTIVITY};
use tokenobs::dataset::ConductivitySpec;
use tokenobs::grid::{Field, GridSpec};
use tokenobs::lattice_ops::{build_modified_laplacian, build_tokenizer_matrix, SparseOperator};
use tokenobs::observability::{
    annihilation_witness, expm, hautus_test, kalman_observability_matrix, krylov_observable_rank,
    linear_reconstruct_initial_state, rank_test, witness_eigenvalue, DEFAULT_RANK_TOL,
};
use tokenobs::Error;

fn gaussian_mat(rng: &mut ChaCha20Rng, rows: usize, cols: usize, scale: f64) -> Mat<f64> {
    Mat::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Orthonormal columns by modified Gram–Schmidt.
fn random_orthogonal(rng: &mut ChaCha20Rng, n: usize) -> Mat<f64> {
    let mut q = gaussian_mat(rng, n, n, 1.0);
    for j in 0..n {
        for i in 0..j {
            let d: f64 = (0..n).map(|r| q[(r, i)] * q[(r, j)]).sum();
            for r in 0..n {
                q[(r, j)] -= d * q[(r, i)];
            }
        }
        let norm = (0..n).map(|r| q[(r, j)] * q[(r, j)]).sum::<f64>().sqrt();
        for r in 0..n {
            q[(r, j)] /= norm;
        }
    }
    q
}

/// Random pair `(A, h)`; when `hidden > 0` the last `hidden` coordinates
/// (before a random rotation) never reach the output.
fn random_pair(rng: &mut ChaCha20Rng, n: usize, m: usize, hidden: usize, shift: f64) -> (Mat<f64>, Mat<f64>) {
    let scale = 1.0 / (n as f64).sqrt();
    let mut a = gaussian_mat(rng, n, n, scale);
    let mut h = gaussian_mat(rng, m, n, 1.0);
    let seen = n - hidden;
    for i in 0..seen {
        for j in seen..n {
            a[(i, j)] = 0.0;
        }
    }
    for r in 0..m {
        for j in seen..n {
            h[(r, j)] = 0.0;
        }
    }
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let q = random_orthogonal(rng, n);
    (&q * &a * q.transpose(), &h * q.transpose())
}

#[test]
fn kalman_and_hautus_agree_on_random_systems() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let mut observable = 0;
    for trial in 0..200 {
        let n = rng.random_range(2..=12);
        let m = rng.random_range(1..=3);
        let hidden = if trial % 2 == 0 { 0 } else { rng.random_range(1..n) };
        let (a, h) = random_pair(&mut rng, n, m, hidden, 0.0);
        let (a, h) = (SparseOperator::from_dense(&a), SparseOperator::from_dense(&h));
        let kalman = rank_test(&kalman_observability_matrix(&a, &h, None).unwrap(), DEFAULT_RANK_TOL).unwrap();
        let hautus = hautus_test(&a, &h, 1e-8, None).unwrap();
        assert_eq!(
            kalman.observable,
            hautus.observable(),
            "trial {trial}: n {n}, m {m}, hidden {hidden}, rank {}, min ‖hv‖ {:e}",
            kalman.rank,
            hautus.min_output_norm
        );
        assert_eq!(kalman.observable, hidden == 0, "trial {trial}");
        if hidden > 0 {
            assert_eq!(kalman.rank, n - hidden);
        }
        let krylov = krylov_observable_rank(&a, &h, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(krylov.rank, kalman.rank, "trial {trial}");
        observable += usize::from(kalman.observable);
    }
    assert_eq!(observable, 100);
}

fn mat_vec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum()).collect()
}

fn sampled_outputs(a: &Mat<f64>, h: &Mat<f64>, x0: &[f64], horizon: f64, steps: usize) -> Vec<Vec<f64>> {
    let step = expm(&(a * faer::Scale(horizon / steps as f64)));
    let mut x = x0.to_vec();
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        out.push(mat_vec(h, &x));
        if k < steps {
            x = mat_vec(&step, &x);
        }
    }
    out
}

#[test]
fn gramian_reconstructs_initial_states() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let steps = 10_000;
    let horizon = 4.0;
    for trial in 0..50 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=2);
        let (a, h) = random_pair(&mut rng, n, m, 0, 0.3);
        let kalman = rank_test(
            &kalman_observability_matrix(&SparseOperator::from_dense(&a), &SparseOperator::from_dense(&h), None).unwrap(),
            DEFAULT_RANK_TOL,
        )
        .unwrap();
        assert!(kalman.observable);
        let x0: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let outputs = sampled_outputs(&a, &h, &x0, horizon, steps);
        let rebuilt = linear_reconstruct_initial_state(&a, &h, &outputs, horizon).unwrap();
        let err = rebuilt.iter().zip(&x0).map(|(r, x)| (r - x).powi(2)).sum::<f64>().sqrt();
        let size = x0.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(err < 1e-5 * size.max(1.0), "trial {trial}: error {err:e}");
    }
}

#[test]
fn gramian_refuses_unobservable_pairs() {
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    for _ in 0..10 {
        let n = rng.random_range(2..=6);
        let hidden = rng.random_range(1..n);
        let (a, h) = random_pair(&mut rng, n, 1, hidden, 0.3);
        let x0 = vec![1.0; n];
        let outputs = sampled_outputs(&a, &h, &x0, 1.0, 200);
        let got = linear_reconstruct_initial_state(&a, &h, &outputs, 1.0);
        assert!(matches!(got, Err(Error::NotObservable(_))), "{got:?}");
    }
}

#[test]
fn witness_is_silent_eigenvector_of_constant_heat() {
    let n = 16;
    let patch = 4;
    let grid = GridSpec::unit(n).unwrap();
    let a = build_modified_laplacian(&Field::constant(n, 0.05), &grid).unwrap();
    let h = build_tokenizer_matrix(&grid, patch, false).unwrap();
    let w = annihilation_witness(&grid, patch).unwrap();
    let tokens = h.apply(w.as_slice()).unwrap();
    assert!(tokens.iter().all(|t| t.abs() < 1e-12));
    let lambda = witness_eigenvalue(0.05, &grid, patch).unwrap();
    let aw = a.apply(w.as_slice()).unwrap();
    let resid = aw.iter().zip(w.as_slice()).map(|(x, y)| (x - lambda * y).abs()).fold(0.0, f64::max);
    assert!(resid < 1e-10, "eigen residual {resid:e}");
    let rank = krylov_observable_rank(&a, &h, DEFAULT_RANK_TOL).unwrap();
    assert!(rank.rank < n * n);
    assert!(!rank.observable);
}

#[test]
fn random_conductivity_heat_has_no_silent_mode() {
    let n = 16;
    let grid = GridSpec::unit(n).unwrap();
    let h = build_tokenizer_matrix(&grid, 4, false).unwrap();
    let ConductivitySpec::Grf { scale, sigma, m, nu, .. } = DEFAULT_CONDUCTIVITY else {
        unreachable!("default conductivity is random")
    };
    for seed in CONDUCTIVITY_SEED..CONDUCTIVITY_SEED + 3 {
        let spec = ConductivitySpec::Grf { scale, sigma, m, nu, seed };
        let a = build_modified_laplacian(&spec.build(n).unwrap(), &grid).unwrap();
        let out = hautus_test(&a, &h, 1e-8, None).unwrap();
        assert!(out.observable(), "seed {seed}: min ‖hv‖ {:e}", out.min_output_norm);
        assert!(out.failing.is_empty());
        assert_eq!(out.checked, out.total);
    }
}
