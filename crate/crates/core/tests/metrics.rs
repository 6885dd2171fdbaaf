use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use tokenobs::grid::StateLayout;
use tokenobs::learners::{fit_map, Learner, MapRole, PairDesign};
use tokenobs::rollout_metrics::{
    autoregressive_rollout, correlation_ensemble_stats, frame_residue, full_pipeline_rollout,
    nearest_subvideo_distance, pearson_lags, temporal_correlation, ResidueNorm,
};
use tokenobs::solvers::{Equation, Trajectory};
use tokenobs::tokenizer::TokenHistory;

fn normals(rng: &mut ChaCha20Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

#[test]
fn subvideo_distance_matches_brute_force() {
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    for _ in 0..20 {
        let dim = rng.random_range(1..=4);
        let frames = rng.random_range(3..=9);
        let nc = rng.random_range(1..=frames);
        let reference: Vec<Vec<f64>> = (0..frames).map(|_| normals(&mut rng, dim)).collect();
        let clip: Vec<Vec<f64>> = (0..nc).map(|_| normals(&mut rng, dim)).collect();
        let mut best = f64::INFINITY;
        for start in 0..=frames - nc {
            let mut flat_clip = Vec::new();
            let mut flat_window = Vec::new();
            for t in 0..nc {
                flat_clip.extend_from_slice(&clip[t]);
                flat_window.extend_from_slice(&reference[start + t]);
            }
            let d = flat_clip
                .iter()
                .zip(&flat_window)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            best = best.min(d);
        }
        let got = nearest_subvideo_distance(&clip, &reference).unwrap();
        assert!((got - best).abs() < 1e-12 * best.max(1.0));
    }
    let reference: Vec<Vec<f64>> = (0..6).map(|t| vec![t as f64, -(t as f64)]).collect();
    assert_eq!(nearest_subvideo_distance(&reference[2..5], &reference).unwrap(), 0.0);
}

#[test]
fn correlation_of_reference_signals() {
    let mut rng = ChaCha20Rng::seed_from_u64(22);
    let noise = normals(&mut rng, 10_000);
    let rho = pearson_lags(&noise, 20).unwrap();
    assert_eq!(rho[0], 1.0);
    assert!(rho[1..].iter().all(|r| r.abs() < 0.05), "{rho:?}");

    let period = 25;
    let wave: Vec<f64> = (0..2000)
        .map(|t| (2.0 * std::f64::consts::PI * t as f64 / period as f64).sin())
        .collect();
    let rho = pearson_lags(&wave, 2 * period).unwrap();
    assert!(rho[period] >= 0.99 && rho[2 * period] >= 0.99);
    assert!(rho[period / 2] < -0.9);
}

fn line_video(values: Vec<f64>) -> Trajectory {
    let frames = values.into_iter().map(|v| vec![v, 0.0]).collect();
    Trajectory::new(StateLayout::Line { n: 2 }, frames, 1.0, Equation::Synthetic).unwrap()
}

#[test]
fn ensemble_mean_averages_per_video_correlations() {
    let mut rng = ChaCha20Rng::seed_from_u64(23);
    let a = line_video(normals(&mut rng, 300));
    let b = line_video((0..300).map(|t| (0.2 * t as f64).cos() + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect());
    let ra = temporal_correlation(&a, (0, 0), 10).unwrap().mean;
    let rb = temporal_correlation(&b, (0, 0), 10).unwrap().mean;
    let both = correlation_ensemble_stats(&[a, b], (0, 0), 10).unwrap();
    for l in 0..=10 {
        assert!((both.mean[l] - 0.5 * (ra[l] + rb[l])).abs() < 1e-14);
        let spread = (ra[l] - rb[l]).abs() / std::f64::consts::SQRT_2;
        assert!((both.std[l] - spread).abs() < 1e-12);
    }
    assert_eq!(both.ensemble_size, 2);
}

#[test]
fn residue_identities() {
    let mut rng = ChaCha20Rng::seed_from_u64(24);
    let truth = normals(&mut rng, 64);
    for norm in [ResidueNorm::L1, ResidueNorm::L2, ResidueNorm::Linf] {
        assert_eq!(frame_residue(&truth, &truth, norm), 0.0);
    }
    let shifted: Vec<f64> = truth.iter().map(|v| v - 0.25).collect();
    assert!((frame_residue(&shifted, &truth, ResidueNorm::L1) - 0.25).abs() < 1e-15);
    assert!((frame_residue(&shifted, &truth, ResidueNorm::L2) - 0.0625).abs() < 1e-15);
    assert!((frame_residue(&shifted, &truth, ResidueNorm::Linf) - 0.25).abs() < 1e-15);
    let other = normals(&mut rng, 64);
    let l1 = frame_residue(&other, &truth, ResidueNorm::L1);
    let l2 = frame_residue(&other, &truth, ResidueNorm::L2);
    let linf = frame_residue(&other, &truth, ResidueNorm::Linf);
    assert!(l1 <= linf && l1 * l1 <= l2 && l2 <= linf * linf);
}

/// `x_{t+1} = M x_t` with `M` a scaled rotation in two planes plus a decaying direction.
fn step(x: &[f64]) -> Vec<f64> {
    let (c1, s1) = (0.3f64.cos(), 0.3f64.sin());
    let (c2, s2) = (1.1f64.cos(), 1.1f64.sin());
    vec![
        0.995 * (c1 * x[0] - s1 * x[1]),
        0.995 * (s1 * x[0] + c1 * x[1]),
        c2 * x[2] - s2 * x[3],
        s2 * x[2] + c2 * x[3],
        0.9 * x[4],
    ]
}

fn orbit(x0: Vec<f64>, len: usize) -> Vec<Vec<f64>> {
    let mut out = vec![x0];
    while out.len() < len {
        let next = step(out.last().unwrap());
        out.push(next);
    }
    out
}

fn lift(x: &[f64]) -> Vec<f64> {
    let mut f = x.to_vec();
    f.extend([x[0] + 2.0 * x[3], x[1] * 0.5 - x[4], x[2] - x[0]]);
    f
}

#[test]
fn rollout_of_exact_linear_system_stays_on_truth() {
    let mut rng = ChaCha20Rng::seed_from_u64(25);
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..5 {
        let seq = orbit(normals(&mut rng, 5), 40);
        for w in seq.windows(2) {
            inputs.push(w[0].clone());
            targets.push(w[1].clone());
        }
    }
    let design = PairDesign::new(inputs.clone(), targets).unwrap();
    let learner = Learner::Lstsq { ridge: 0.0, bias: false };
    let g = fit_map(&design, None, MapRole::Autoregressive, 1, &learner).unwrap().map;
    let recon_design = PairDesign::new(inputs.clone(), inputs.iter().map(|x| lift(x)).collect()).unwrap();
    let recon = fit_map(&recon_design, None, MapRole::Reconstruction, 1, &learner).unwrap().map;

    let truth = orbit(normals(&mut rng, 5), 101);
    let seed = TokenHistory::new(vec![truth[0].clone()]).unwrap();
    let plain = autoregressive_rollout(&g, &seed, 100).unwrap();
    let piped = full_pipeline_rollout(&g, &recon, &seed, 100).unwrap();
    assert_eq!(plain.tokens, piped.tokens);
    for t in 0..=100 {
        for (p, y) in plain.tokens[t].iter().zip(&truth[t]) {
            assert!((p - y).abs() < 1e-8, "frame {t}");
        }
    }
    let fields = piped.fields.unwrap();
    assert_eq!(fields.len(), 100);
    for (i, f) in fields.iter().enumerate() {
        for (p, y) in f.iter().zip(lift(&truth[i + 1])) {
            assert!((p - y).abs() < 1e-8, "field {i}");
        }
    }
}
