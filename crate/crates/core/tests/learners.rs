use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use tokenobs::dataset::{normalize_dataset, Dataset};
use tokenobs::grid::StateLayout;
use tokenobs::learners::{
    fit_least_squares, fit_map, fit_sgd, mse_loss_and_grad, HistoryDesign, Learner, LstsqOptions, MapRole,
    PairDesign, TrainConfig,
};
use tokenobs::solvers::{Equation, Trajectory};

fn gaussian(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

/// Targets `W x + b + noise * e`.
fn linear_problem(seed: u64, n: usize, p: usize, q: usize, noise: f64) -> (PairDesign, Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let w = gaussian(&mut rng, q, p);
    let b: Vec<f64> = (0..q).map(|_| rng.sample(StandardNormal)).collect();
    let x = gaussian(&mut rng, n, p);
    let y = x
        .iter()
        .map(|xi| {
            (0..q)
                .map(|o| {
                    let e: f64 = rng.sample(StandardNormal);
                    w[o].iter().zip(xi).map(|(a, c)| a * c).sum::<f64>() + b[o] + noise * e
                })
                .collect()
        })
        .collect();
    (PairDesign::new(x, y).unwrap(), w, b)
}

#[test]
fn lstsq_residual_is_orthogonal_to_the_design() {
    let (design, _, _) = linear_problem(1, 300, 20, 4, 0.5);
    let fit = fit_least_squares(&design, &LstsqOptions { ridge: 0.0, bias: true, block_rows: 64 }).unwrap();
    let bias = fit.bias.as_ref().unwrap();
    let mut normal = vec![vec![0.0; 21]; 4];
    for (x, y) in design.inputs.iter().zip(&design.targets) {
        for o in 0..4 {
            let pred: f64 = (0..20).map(|j| fit.weights[(o, j)] * x[j]).sum::<f64>() + bias[o];
            let r = pred - y[o];
            for j in 0..20 {
                normal[o][j] += r * x[j];
            }
            normal[o][20] += r;
        }
    }
    let worst = normal.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst < 1e-9, "largest normal-equation residual {worst:e}");
    assert_eq!(fit.report.rank, 21);
    assert!(!fit.report.rank_deficient);
}

#[test]
fn lstsq_recovers_an_exact_linear_map() {
    let (design, w, b) = linear_problem(2, 100, 12, 3, 0.0);
    let fit = fit_least_squares(&design, &LstsqOptions { ridge: 0.0, bias: true, block_rows: 0 }).unwrap();
    for o in 0..3 {
        for j in 0..12 {
            assert!((fit.weights[(o, j)] - w[o][j]).abs() < 1e-8);
        }
        assert!((fit.bias.as_ref().unwrap()[o] - b[o]).abs() < 1e-8);
    }
}

#[test]
fn sgd_reaches_the_least_squares_solution() {
    // 40 features x 5 outputs = 200 unknowns.
    let (design, _, _) = linear_problem(3, 400, 40, 5, 0.3);
    let exact = fit_least_squares(&design, &LstsqOptions { ridge: 0.0, bias: false, block_rows: 0 }).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.02,
        steps: 6000,
        batch_size: 400,
        bias: false,
        final_lr_fraction: 1e-3,
        ..TrainConfig::default()
    };
    let fit = fit_sgd(&design, None, &cfg).unwrap();
    let mut worst = 0.0f64;
    for o in 0..5 {
        for j in 0..40 {
            worst = worst.max((fit.weights[(o, j)] - exact.weights[(o, j)]).abs());
        }
    }
    assert!(worst < 1e-4, "largest weight gap {worst:e}");
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let (b, p, q) = (16, 6, 3);
    let to_mat = |rows: Vec<Vec<f64>>| Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    let x = to_mat(gaussian(&mut rng, b, p));
    let y = to_mat(gaussian(&mut rng, b, q));
    let w = to_mat(gaussian(&mut rng, q, p));
    let bias: Vec<f64> = (0..q).map(|_| rng.sample(StandardNormal)).collect();
    let penalty = 0.03;
    let (_, gw, gb) = mse_loss_and_grad(&w, Some(&bias), &x, &y, penalty);
    let gb = gb.unwrap();
    let h = 1e-6;
    let loss = |w: &Mat<f64>, bias: &[f64]| mse_loss_and_grad(w, Some(bias), &x, &y, penalty).0;
    for o in 0..q {
        for j in 0..p {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[(o, j)] += h;
            down[(o, j)] -= h;
            let fd = (loss(&up, &bias) - loss(&down, &bias)) / (2.0 * h);
            assert!((fd - gw[(o, j)]).abs() <= 1e-6 * gw[(o, j)].abs().max(1.0));
        }
        let (mut up, mut down) = (bias.clone(), bias.clone());
        up[o] += h;
        down[o] -= h;
        let fd = (loss(&w, &up) - loss(&w, &down)) / (2.0 * h);
        assert!((fd - gb[o]).abs() <= 1e-6 * gb[o].abs().max(1.0));
    }
}

#[test]
fn history_design_recovers_a_linear_recurrence() {
    // x_{t+1} = A x_t + B x_{t-1} on 4 tokens.
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let d = 4;
    let a: Vec<Vec<f64>> = gaussian(&mut rng, d, d).into_iter().map(|r| r.iter().map(|v| 0.3 * v).collect()).collect();
    let bm: Vec<Vec<f64>> = gaussian(&mut rng, d, d).into_iter().map(|r| r.iter().map(|v| 0.2 * v).collect()).collect();
    let sequences: Vec<Vec<Vec<f64>>> = (0..6)
        .map(|_| {
            let mut seq = gaussian(&mut rng, 2, d);
            for t in 1..40 {
                let next = (0..d)
                    .map(|i| (0..d).map(|j| a[i][j] * seq[t][j] + bm[i][j] * seq[t - 1][j]).sum())
                    .collect();
                seq.push(next);
            }
            seq
        })
        .collect();
    let design = HistoryDesign::autoregressive(sequences.clone(), 2).unwrap();
    let fitted = fit_map(&design, None, MapRole::Autoregressive, 2, &Learner::Lstsq { ridge: 0.0, bias: false }).unwrap();
    for seq in &sequences {
        for t in 1..seq.len() - 1 {
            let input: Vec<f64> = seq[t - 1].iter().chain(&seq[t]).copied().collect();
            let pred = fitted.map.apply(&input).unwrap();
            for (p, y) in pred.iter().zip(&seq[t + 1]) {
                assert!((p - y).abs() < 1e-8 * y.abs().max(1.0));
            }
        }
    }
}

fn line_traj(values: &[f64]) -> Trajectory {
    let frames = values.chunks(4).map(|c| c.to_vec()).collect();
    Trajectory::new(StateLayout::Line { n: 4 }, frames, 0.1, Equation::Synthetic).unwrap()
}

#[test]
fn normalization_uses_only_training_statistics() {
    let train = vec![
        line_traj(&[0.0, 0.5, 1.0, 2.0, 1.0, 1.0, 0.2, 0.4]),
        line_traj(&[1.5, 0.1, 0.3, 0.9, 1.2, 0.6, 0.7, 0.8]),
    ];
    let test = line_traj(&[-5.0, 5.0, 0.0, 1.0, 9.0, -3.0, 0.5, 0.5]);
    let mut data = Dataset::new([train, vec![test]].concat(), None, 2).unwrap();
    let norm = normalize_dataset(&mut data).unwrap();
    assert_eq!((norm.min, norm.max), (0.0, 2.0));
    let (lo, hi) = tokenobs::dataset::Normalization::range_of(data.train());
    assert!((lo + 1.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
    assert_eq!(data.test()[0].frames[0][0], norm.forward(-5.0));
}
