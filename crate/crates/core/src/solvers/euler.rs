use log::warn;

use super::{check_finite, Equation, Trajectory};
use crate::error::{Error, Result};
use crate::grid::StateLayout;
use crate::lattice_ops::SparseOperator;

/// `state + dt * (op * state)`.
pub fn step_forward_euler(op: &SparseOperator, state: &[f64], dt: f64) -> Result<Vec<f64>> {
    if !op.is_square() {
        return Err(Error::dim("Euler step needs a square operator"));
    }
    let mut out = op.apply(state)?;
    for (o, &s) in out.iter_mut().zip(state) {
        *o = s + dt * *o;
    }
    Ok(out)
}

/// Run `steps` forward-Euler states from `x0`, storing every `skip`-th one.
///
/// States are indexed `0..steps` with state 0 equal to `x0`; the stored
/// frames are those with index divisible by `skip`, so the result holds
/// `ceil(steps / skip)` frames. A warning is logged (the run continues)
/// when `dt` times the Gershgorin bound of `op` reaches 2.
pub fn simulate_linear(
    op: &SparseOperator,
    x0: &[f64],
    layout: StateLayout,
    dt: f64,
    steps: usize,
    skip: usize,
) -> Result<Trajectory> {
    if steps == 0 || skip == 0 {
        return Err(Error::param("steps and skip must be >= 1"));
    }
    if !(dt > 0.0) {
        return Err(Error::param(format!("dt must be > 0, got {dt}")));
    }
    if x0.len() != layout.len() || op.rows() != layout.len() || !op.is_square() {
        return Err(Error::dim(format!(
            "operator {}x{} / state {} do not match layout of size {}",
            op.rows(),
            op.cols(),
            x0.len(),
            layout.len()
        )));
    }
    let bound = dt * op.gershgorin_radius();
    if bound >= 2.0 {
        warn!("explicit Euler step may be unstable: dt * spectral bound = {bound:.3} >= 2");
    }
    let equation = match layout {
        StateLayout::Wave { .. } => Equation::Wave,
        StateLayout::Scalar { .. } => Equation::Heat,
        StateLayout::Line { .. } => Equation::Synthetic,
    };

    let mut frames = Vec::with_capacity(steps.div_ceil(skip));
    let mut state = x0.to_vec();
    let mut next = vec![0.0; state.len()];
    for tau in 0..steps {
        if tau % skip == 0 {
            frames.push(state.clone());
        }
        if tau + 1 == steps {
            break;
        }
        op.apply_into(&state, &mut next)?;
        for (n, &s) in next.iter_mut().zip(&state) {
            *n = s + dt * *n;
        }
        std::mem::swap(&mut state, &mut next);
        check_finite(&state, tau + 1)?;
    }
    Ok(Trajectory {
        layout,
        frames,
        dt: dt * skip as f64,
        skip,
        burn_in: 0,
        equation,
        seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Field, GridSpec};
    use crate::lattice_ops::build_modified_laplacian;

    fn heat_op(n: usize) -> SparseOperator {
        build_modified_laplacian(&Field::constant(n, 1.0), &GridSpec::unit(n).unwrap()).unwrap()
    }

    #[test]
    fn zero_dt_is_identity_and_constants_are_fixed() {
        let op = heat_op(6);
        let x: Vec<f64> = (0..36).map(|k| (k as f64).sin()).collect();
        assert_eq!(step_forward_euler(&op, &x, 0.0).unwrap(), x);
        let c = vec![0.7; 36];
        let out = step_forward_euler(&op, &c, 0.2).unwrap();
        assert!(out.iter().all(|v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn fourier_mode_decays_by_stencil_factor() {
        // eigenvalue of the five-point stencil for mode (k1, k2): 2cos(w1) + 2cos(w2) - 4
        let n = 8;
        let (k1, k2) = (1usize, 3usize);
        let w1 = 2.0 * std::f64::consts::PI * k1 as f64 / n as f64;
        let w2 = 2.0 * std::f64::consts::PI * k2 as f64 / n as f64;
        let lambda = 2.0 * w1.cos() + 2.0 * w2.cos() - 4.0;
        let mode = Field::from_fn(n, |i, j| (w1 * i as f64 + w2 * j as f64).cos());
        let dt = 0.1;
        let out = step_forward_euler(&heat_op(n), mode.as_slice(), dt).unwrap();
        for (o, m) in out.iter().zip(mode.as_slice()) {
            assert!((o - (1.0 + dt * lambda) * m).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_count_and_first_frame() {
        let op = heat_op(4);
        let x0: Vec<f64> = (0..16).map(|k| k as f64).collect();
        let t = simulate_linear(&op, &x0, StateLayout::Scalar { n: 4 }, 0.1, 10, 3).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.frames[0], x0);
        assert!((t.dt - 0.3).abs() < 1e-15);
        let zero = simulate_linear(&op, &[0.0; 16], StateLayout::Scalar { n: 4 }, 0.1, 5, 1).unwrap();
        assert!(zero.frames.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn divergence_reports_step() {
        let op = heat_op(4).scaled(1e200);
        let x0: Vec<f64> = (0..16).map(|k| k as f64).collect();
        match simulate_linear(&op, &x0, StateLayout::Scalar { n: 4 }, 1e200, 10, 1) {
            Err(Error::Divergence { step, .. }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let op = heat_op(4);
        assert!(step_forward_euler(&op, &[0.0; 9], 0.1).is_err());
        assert!(simulate_linear(&op, &[0.0; 16], StateLayout::Wave { n: 4 }, 0.1, 3, 1).is_err());
    }
}
