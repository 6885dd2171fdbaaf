use proptest::prelude::*;
use tokenobs::grid::{Field, GridSpec};
use tokenobs::lattice_ops::{build_modified_laplacian, build_tokenizer_matrix, build_wave_generator};

/// Flux form written out pixel by pixel, independent of the sparse assembly.
fn flux_laplacian(a: &[f64], u: &[f64], n: usize, dx: f64) -> Vec<f64> {
    let at = |i: usize, j: usize| (i % n) * n + (j % n);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
            let (jp, jm) = ((j + 1) % n, (j + n - 1) % n);
            let x = a[at(i, j)] * (u[at(ip, j)] - u[at(i, j)]) - a[at(im, j)] * (u[at(i, j)] - u[at(im, j)]);
            let y = a[at(i, j)] * (u[at(i, jp)] - u[at(i, j)]) - a[at(i, jm)] * (u[at(i, j)] - u[at(i, jm)]);
            out[at(i, j)] = (x + y) / (dx * dx);
        }
    }
    out
}

fn patch_means(u: &[f64], n: usize, p: usize) -> Vec<f64> {
    let t = n / p;
    let mut out = Vec::with_capacity(t * t);
    for ti in 0..t {
        for tj in 0..t {
            let mut s = 0.0;
            for a in 0..p {
                for b in 0..p {
                    s += u[(p * ti + a) * n + p * tj + b];
                }
            }
            out.push(s / (p * p) as f64);
        }
    }
    out
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

fn field_strategy() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, f64)> {
    (2usize..9).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(0.05f64..5.0, n * n),
            prop::collection::vec(-3.0f64..3.0, n * n),
            0.25f64..2.0,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn laplacian_matches_flux_form((n, a, u, dx) in field_strategy()) {
        let grid = GridSpec::new(n, dx).unwrap();
        let op = build_modified_laplacian(&Field::from_vec(n, a.clone()).unwrap(), &grid).unwrap();
        prop_assert!(close(&op.apply(&u).unwrap(), &flux_laplacian(&a, &u, n, dx), 1e-12));
    }

    #[test]
    fn laplacian_is_symmetric_dissipative_and_conservative((n, a, u, dx) in field_strategy()) {
        let grid = GridSpec::new(n, dx).unwrap();
        let op = build_modified_laplacian(&Field::from_vec(n, a).unwrap(), &grid).unwrap();
        prop_assert!(op.asymmetry() <= 1e-12 * op.gershgorin_radius());
        let au = op.apply(&u).unwrap();
        let energy: f64 = u.iter().zip(&au).map(|(x, y)| x * y).sum();
        prop_assert!(energy <= 1e-10);
        prop_assert!(au.iter().sum::<f64>().abs() <= 1e-9 * (1.0 + op.gershgorin_radius()));
    }

    #[test]
    fn wave_generator_acts_blockwise((n, a, u, dx) in field_strategy()) {
        let grid = GridSpec::new(n, dx).unwrap();
        let field = Field::from_vec(n, a.clone()).unwrap();
        let gen = build_wave_generator(&field, &grid).unwrap();
        let v: Vec<f64> = u.iter().rev().copied().collect();
        let mut x = u.clone();
        x.extend_from_slice(&v);
        let out = gen.apply(&x).unwrap();
        prop_assert!(close(&out[..n * n], &v, 0.0));
        prop_assert!(close(&out[n * n..], &flux_laplacian(&a, &u, n, dx), 1e-12));
    }

    #[test]
    fn tokenizer_matrix_matches_patch_means(t in 1usize..5, p in 2usize..5, seed in any::<u64>()) {
        let n = t * p;
        let grid = GridSpec::unit(n).unwrap();
        let u: Vec<f64> = (0..n * n).map(|i| ((i as u64).wrapping_mul(seed | 1) % 97) as f64 - 48.0).collect();
        let h = build_tokenizer_matrix(&grid, p, false).unwrap();
        prop_assert!(close(&h.apply(&u).unwrap(), &patch_means(&u, n, p), 1e-13));
        let hw = build_tokenizer_matrix(&grid, p, true).unwrap();
        let mut x = u.clone();
        x.extend(std::iter::repeat(1e6).take(n * n));
        prop_assert!(close(&hw.apply(&x).unwrap(), &patch_means(&u, n, p), 1e-13));
    }
}

#[test]
fn dense_laplacian_on_a_four_grid_by_hand() {
    // a = 1 except a(0,0) = 3: fluxes leaving (0,0) forward are tripled.
    let n = 4;
    let mut a = vec![1.0; n * n];
    a[0] = 3.0;
    let grid = GridSpec::unit(n).unwrap();
    let dense = build_modified_laplacian(&Field::from_vec(n, a).unwrap(), &grid).unwrap().to_dense();
    assert_eq!(dense[(0, 0)], -8.0);
    assert_eq!(dense[(0, 4)], 3.0);
    assert_eq!(dense[(0, 1)], 3.0);
    assert_eq!(dense[(0, 12)], 1.0);
    assert_eq!(dense[(0, 3)], 1.0);
    assert_eq!(dense[(4, 4)], -6.0);
    assert_eq!(dense[(5, 5)], -4.0);
}
