//! Periodic square lattices and the scalar fields living on them.
//!
//! Lattice point `(i, j)` is stored at flat index `n * i + j` (row-major),
//! with `i` running along the x axis and `j` along the y axis. Every
//! operator, tokenizer and on-disk blob in this crate uses that map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid with `n` points per axis and spacing `dx`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub dx: f64,
}

impl GridSpec {
    pub fn new(n: usize, dx: f64) -> Result<Self> {
        let grid = GridSpec { n, dx };
        grid.validate()?;
        Ok(grid)
    }

    /// Unit-spaced grid, the setting used by the heat and wave datasets.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param(format!("grid needs n >= 2, got {}", self.n)));
        }
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::param(format!("grid spacing must be > 0, got {}", self.dx)));
        }
        Ok(())
    }

    #[inline]
    pub fn points(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        self.n * i + j
    }

    /// Flat index of `(i + di, j + dj)` with periodic wrapping.
    #[inline]
    pub fn wrapped(&self, i: usize, j: usize, di: isize, dj: isize) -> usize {
        let n = self.n as isize;
        let ii = (i as isize + di).rem_euclid(n) as usize;
        let jj = (j as isize + dj).rem_euclid(n) as usize;
        self.index(ii, jj)
    }
}

/// Real scalar field on an `n x n` periodic lattice, flattened row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    n: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Field {
            n,
            values: vec![c; n * n],
        }
    }

    pub fn from_vec(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::dim(format!(
                "field of side {n} needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        Ok(Field { n, values })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Field { n, values }
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.n * i + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[self.n * i + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            n: self.n,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Memory layout of one stored frame of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateLayout {
    /// One `n x n` field.
    Scalar { n: usize },
    /// Wave state: amplitude block `u` followed by momentum block `v`, each `n x n`.
    Wave { n: usize },
    /// Periodic 1D line of `n` points.
    Line { n: usize },
}

impl StateLayout {
    pub fn len(&self) -> usize {
        match *self {
            StateLayout::Scalar { n } => n * n,
            StateLayout::Wave { n } => 2 * n * n,
            StateLayout::Line { n } => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points per axis.
    pub fn side(&self) -> usize {
        match *self {
            StateLayout::Scalar { n } | StateLayout::Wave { n } | StateLayout::Line { n } => n,
        }
    }

    /// Length of the observed (amplitude) part of a frame.
    pub fn amplitude_len(&self) -> usize {
        match *self {
            StateLayout::Scalar { n } | StateLayout::Wave { n } => n * n,
            StateLayout::Line { n } => n,
        }
    }
}
