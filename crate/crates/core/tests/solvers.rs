use tokenobs::grid::{Field, GridSpec, StateLayout};
use tokenobs::lattice_ops::build_modified_laplacian;
use tokenobs::random_fields::{sample_matern_field, GrfParams};
use tokenobs::solvers::{
    etdrk_coefficients, kse1d_symbol, simulate_kse1d, simulate_kse2d, simulate_linear, Kse2dStepper,
    DEFAULT_CONTOUR_POINTS,
};

const SIDE: f64 = 20.0 * std::f64::consts::PI;

fn smooth_start(n: usize, seed: u64) -> Field {
    sample_matern_field(&GrfParams {
        grid_size: n,
        sigma: 1.0,
        m: 0.1,
        nu: 1.0,
        seed,
    })
    .unwrap()
}

fn kse2d_at(u0: &Field, horizon: f64, dt: f64) -> Vec<f64> {
    let steps = (horizon / dt).round() as usize;
    let mut stepper = Kse2dStepper::new(u0.side(), SIDE, dt).unwrap();
    let mut v = stepper.to_spectral(u0.as_slice());
    for _ in 0..steps {
        stepper.step(&mut v);
    }
    stepper.to_physical(&v)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// A few Fourier modes, inside and outside the unstable band.
fn low_mode_start(n: usize, amp: f64) -> Field {
    let w = 2.0 * std::f64::consts::PI / n as f64;
    Field::from_fn(n, |i, j| {
        let (x, y) = (w * i as f64, w * j as f64);
        amp * ((6.0 * x).sin() + 0.5 * (4.0 * x + 9.0 * y).cos() - 0.8 * (10.0 * y).sin()
            + 0.3 * (14.0 * x - 11.0 * y).cos())
    })
}

#[test]
fn kse2d_etdrk4_converges_at_fourth_order() {
    let u0 = low_mode_start(64, 4.0);
    let horizon = 1.0;
    let reference = kse2d_at(&u0, horizon, 1e-2 / 64.0);
    let errors: Vec<f64> = [1e-2, 5e-3, 2.5e-3, 1.25e-3]
        .iter()
        .map(|&dt| max_diff(&kse2d_at(&u0, horizon, dt), &reference))
        .collect();
    for w in errors.windows(2) {
        let slope = (w[0] / w[1]).log2();
        assert!((slope - 4.0).abs() <= 0.3, "slope {slope}, errors {errors:?}");
    }
}

#[test]
fn kse2d_frames_stay_mean_free() {
    let u0 = smooth_start(64, 3);
    let traj = simulate_kse2d(&u0, SIDE, 0.01, 3000, 10, 0).unwrap();
    let worst = traj
        .frames
        .iter()
        .map(|f| (f.iter().sum::<f64>() / f.len() as f64).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-10, "largest |mean| {worst:e}");
    assert!(traj.frames.last().unwrap().iter().any(|x| x.abs() > 1e-3));
}

#[test]
fn zero_is_a_fixed_point() {
    let traj = simulate_kse2d(&Field::zeros(32), SIDE, 0.01, 200, 1, 0).unwrap();
    assert!(traj.frames.iter().flatten().all(|&x| x == 0.0));
    let traj = simulate_kse1d(&[0.0; 64], 80.0, 0.01, 200).unwrap();
    assert!(traj.frames.iter().flatten().all(|&x| x == 0.0));
}

#[test]
fn kse1d_etdrk2_converges_at_second_order() {
    let n = 128;
    let l = 80.0;
    let u0: Vec<f64> = (0..n)
        .map(|j| {
            let x = l * j as f64 / n as f64;
            (7.0 * std::f64::consts::PI * x / l).sin() + 0.3 * (2.0 * std::f64::consts::PI * x / l).cos()
        })
        .collect();
    let horizon = 5.0;
    let end = |dt: f64| {
        let steps = (horizon / dt).round() as usize + 1;
        simulate_kse1d(&u0, l, dt, steps).unwrap().frames.pop().unwrap()
    };
    let reference = end(0.1 / 64.0);
    let errors: Vec<f64> = (0..3).map(|h| max_diff(&end(0.1 / f64::from(1 << h)), &reference)).collect();
    for w in errors.windows(2) {
        let slope = (w[0] / w[1]).log2();
        assert!((slope - 2.0).abs() <= 0.3, "slope {slope}, errors {errors:?}");
    }
}

/// `phi_k(z) = sum_j z^j / (j + k)!` by series for small `|z|`, by the recursion otherwise.
fn phi(k: usize, z: f64) -> f64 {
    if z.abs() <= 2.0 {
        let mut term = (1..=k).fold(1.0, |acc, i| acc / i as f64);
        let mut sum = 0.0;
        for j in 0..80 {
            sum += term;
            term *= z / (j + k + 1) as f64;
        }
        sum
    } else {
        let mut p = z.exp();
        let mut fact = 1.0;
        for i in 0..k {
            p = (p - 1.0 / fact) / z;
            fact *= (i + 1) as f64;
        }
        p
    }
}

#[test]
fn etdrk_weights_match_phi_functions() {
    let h = 0.25;
    let symbol = [-4000.0, -120.0, -9.0, -1.3, -0.2, -1e-4, 0.0, 1e-6, 0.1, 0.24, 1.0];
    let c = etdrk_coefficients(&symbol, h, DEFAULT_CONTOUR_POINTS).unwrap();
    for (i, &s) in symbol.iter().enumerate() {
        let z = h * s;
        let (p1, p2, p3) = (phi(1, z), phi(2, z), phi(3, z));
        let want = [
            (c.phi1[i], h * p1),
            (c.phi2[i], h * p2),
            (c.q[i], h / 2.0 * phi(1, z / 2.0)),
            (c.f1[i], h * (p1 - 3.0 * p2 + 4.0 * p3)),
            (c.f2[i], h * (p2 - 2.0 * p3)),
            (c.f3[i], h * (4.0 * p3 - p2)),
        ];
        for (got, exact) in want {
            assert!(
                (got - exact).abs() <= 1e-12 * exact.abs().max(h),
                "z = {z}: {got} vs {exact}"
            );
        }
        assert!((c.e[i] - z.exp()).abs() <= 1e-15 * z.exp().max(1.0));
    }
}

#[test]
fn doubling_contour_points_changes_weights_below_tolerance() {
    let (_, symbol) = kse1d_symbol(200, 80.0);
    let a = etdrk_coefficients(&symbol, 0.01, DEFAULT_CONTOUR_POINTS).unwrap();
    let b = etdrk_coefficients(&symbol, 0.01, 2 * DEFAULT_CONTOUR_POINTS).unwrap();
    for (x, y) in [(&a.q, &b.q), (&a.f1, &b.f1), (&a.f2, &b.f2), (&a.f3, &b.f3), (&a.phi1, &b.phi1), (&a.phi2, &b.phi2)] {
        assert!(max_diff(x, y) < 1e-12);
    }
}

#[test]
fn euler_damps_each_fourier_mode_by_its_factor() {
    let n = 16;
    let grid = GridSpec::unit(n).unwrap();
    let a = 0.2;
    let op = build_modified_laplacian(&Field::constant(n, a), &grid).unwrap();
    let dt = 0.5;
    let (p, q) = (3usize, 5usize);
    let theta = |i: usize, j: usize| 2.0 * std::f64::consts::PI * (p * i + q * j) as f64 / n as f64;
    let x0: Vec<f64> = (0..n * n).map(|idx| theta(idx / n, idx % n).cos()).collect();
    let steps = 30;
    let traj = simulate_linear(&op, &x0, StateLayout::Scalar { n }, dt, steps, 1).unwrap();
    let lambda = -4.0 * a
        * ((std::f64::consts::PI * p as f64 / n as f64).sin().powi(2)
            + (std::f64::consts::PI * q as f64 / n as f64).sin().powi(2));
    let factor = 1.0 + dt * lambda;
    for (t, frame) in traj.frames.iter().enumerate() {
        let expected: Vec<f64> = x0.iter().map(|x| x * factor.powi(t as i32)).collect();
        assert!(max_diff(frame, &expected) < 1e-12);
    }
}
