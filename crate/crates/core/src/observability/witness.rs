//! Explicit eigenfunctions of the constant-coefficient Laplacian that patch
//! averaging cannot see.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

fn check(grid: &GridSpec, patch: usize) -> Result<()> {
    grid.validate()?;
    if patch < 2 || grid.n % patch != 0 {
        return Err(Error::param(format!(
            "witness needs a patch >= 2 dividing the grid side {}, got {patch}",
            grid.n
        )));
    }
    Ok(())
}

/// Angular frequency per lattice step along the x axis: one full period per patch.
fn frequency(patch: usize) -> f64 {
    2.0 * PI / patch as f64
}

/// `sin(ω x)` with one full period across each patch, constant along y.
///
/// Every patch average covers whole periods, so the tokens vanish; and
/// the field is a Fourier mode, hence an eigenvector of the
/// constant-conductivity Laplacian. For `patch = 2` the sine samples are
/// all zero, so the cosine of the same frequency is returned instead.
pub fn annihilation_witness(grid: &GridSpec, patch: usize) -> Result<Field> {
    check(grid, patch)?;
    let w = frequency(patch);
    Ok(Field::from_fn(grid.n, |i, _| {
        let phase = w * i as f64;
        if patch == 2 {
            phase.cos()
        } else {
            phase.sin()
        }
    }))
}

/// Eigenvalue of `A_h` with constant conductivity `a` on the witness:
/// `a (2 cos ω - 2) / dx²`.
pub fn witness_eigenvalue(conductivity: f64, grid: &GridSpec, patch: usize) -> Result<f64> {
    check(grid, patch)?;
    Ok(conductivity * (2.0 * frequency(patch).cos() - 2.0) / (grid.dx * grid.dx))
}

/// Complex eigenvector `(w, μ w)` of the wave generator, `μ = i sqrt(-λ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveWitness {
    /// Real part of the stacked eigenvector: `(w, 0)`.
    pub real: Vec<f64>,
    /// Imaginary part: `(0, sqrt(-λ) w)`.
    pub imag: Vec<f64>,
    /// `Im μ`; the eigenvalue is purely imaginary.
    pub frequency: f64,
}

pub fn wave_witness(conductivity: f64, grid: &GridSpec, patch: usize) -> Result<WaveWitness> {
    let w = annihilation_witness(grid, patch)?;
    let omega = (-witness_eigenvalue(conductivity, grid, patch)?).sqrt();
    let p = grid.points();
    let mut real = w.as_slice().to_vec();
    real.extend(std::iter::repeat(0.0).take(p));
    let mut imag = vec![0.0; p];
    imag.extend(w.as_slice().iter().map(|v| omega * v));
    Ok(WaveWitness {
        real,
        imag,
        frequency: omega,
    })
}
