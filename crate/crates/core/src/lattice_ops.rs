//! Sparse operators on the periodic square lattice.
//!
//! All builders produce compressed-row matrices with sorted column indices
//! and duplicates summed, assembled in a fixed order so that two builds
//! from the same inputs are bit-identical.

use std::io::{Read, Write};
use std::path::Path;

use faer::Mat;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Assemble from `(row, col, value)` triplets; repeated positions are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::dim(format!(
                    "entry ({r}, {c}) outside a {rows}x{cols} operator"
                )));
            }
            per_row[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for mut entries in per_row {
            entries.sort_by_key(|&(c, _)| c);
            let mut iter = entries.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseOperator {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseOperator {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Sparse copy of a dense matrix, dropping exact zeros.
    pub fn from_dense(m: &Mat<f64>) -> Self {
        let mut triplets = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &triplets).expect("indices in range")
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// `(col, value)` pairs of row `r`, sorted by column.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect()
    }

    /// `y = self * x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.rows];
        self.apply_into(x, &mut y)?;
        Ok(y)
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.cols || y.len() != self.rows {
            return Err(Error::dim(format!(
                "{}x{} operator applied to length {} into length {}",
                self.rows,
                self.cols,
                x.len(),
                y.len()
            )));
        }
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                triplets.push((c, r, v));
            }
        }
        Self::from_triplets(self.cols, self.rows, &triplets).expect("indices in range")
    }

    /// Sparse product `self * rhs`.
    pub fn matmul(&self, rhs: &SparseOperator) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut triplets = Vec::new();
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    triplets.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.rows, rhs.cols, &triplets)
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.rows {
            return Err(Error::dim("row scaling length must equal row count"));
        }
        let mut out = self.clone();
        for r in 0..self.rows {
            for k in out.row_ptr[r]..out.row_ptr[r + 1] {
                out.values[k] *= d[r];
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &SparseOperator) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::dim("operator sum needs equal shapes"));
        }
        let mut triplets = self.triplets();
        triplets.extend(rhs.triplets());
        Self::from_triplets(self.rows, self.cols, &triplets)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Gershgorin bound on the spectral radius (max absolute row sum).
    pub fn gershgorin_radius(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest `|A - A^T|` entry.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let diff = self.add(&self.transpose().scaled(-1.0)).expect("same shape");
        diff.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Serialize in the binary triplet format:
    ///
    /// ```text
    /// magic  b"SPOP"       4 bytes
    /// version u32 LE       (= 1)
    /// rows, cols, nnz      u64 LE each
    /// nnz x (row u64, col u64, value f64), all LE, in row-major order
    /// ```
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(b"SPOP")?;
        w.write_all(&1u32.to_le_bytes())?;
        for v in [self.rows as u64, self.cols as u64, self.nnz() as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        for (r, c, v) in self.triplets() {
            w.write_all(&(r as u64).to_le_bytes())?;
            w.write_all(&(c as u64).to_le_bytes())?;
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> std::io::Result<Result<Self>> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"SPOP" {
            return Ok(Err(Error::param("not a sparse operator file (bad magic)")));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != 1 {
            return Ok(Err(Error::param(format!("unsupported operator format version {version}"))));
        }
        let mut b8 = [0u8; 8];
        let mut next_u64 = |r: &mut dyn Read| -> std::io::Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let rows = next_u64(&mut r)? as usize;
        let cols = next_u64(&mut r)? as usize;
        let nnz = next_u64(&mut r)? as usize;
        let mut triplets = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let row = next_u64(&mut r)? as usize;
            let col = next_u64(&mut r)? as usize;
            let v = f64::from_bits(next_u64(&mut r)?);
            triplets.push((row, col, v));
        }
        Ok(Self::from_triplets(rows, cols, &triplets))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file)).map_err(|e| Error::io(path, e))?
    }
}

/// One-sided difference along `axis`, `±1/dx` per row with periodic wrap.
///
/// Forward: `(u[i+1] - u[i]) / dx`; backward: `(u[i] - u[i-1]) / dx`, where
/// `i` is the coordinate along `axis`.
pub fn build_difference(axis: Axis, direction: Direction, grid: &GridSpec) -> Result<SparseOperator> {
    grid.validate()?;
    let n = grid.n;
    let inv = 1.0 / grid.dx;
    let (di, dj) = match axis {
        Axis::X => (1, 0),
        Axis::Y => (0, 1),
    };
    let mut triplets = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            let row = grid.index(i, j);
            match direction {
                Direction::Forward => {
                    triplets.push((row, grid.wrapped(i, j, di, dj), inv));
                    triplets.push((row, row, -inv));
                }
                Direction::Backward => {
                    triplets.push((row, row, inv));
                    triplets.push((row, grid.wrapped(i, j, -di, -dj), -inv));
                }
            }
        }
    }
    SparseOperator::from_triplets(n * n, n * n, &triplets)
}

fn check_conductivity(a: &Field, grid: &GridSpec) -> Result<()> {
    grid.validate()?;
    if a.side() != grid.n {
        return Err(Error::dim(format!(
            "conductivity side {} does not match grid side {}",
            a.side(),
            grid.n
        )));
    }
    if let Some(bad) = a.as_slice().iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::param(format!("conductivity must be strictly positive, found {bad}")));
    }
    Ok(())
}

/// `A_h = D_x⁻ diag(a) D_x⁺ + D_y⁻ diag(a) D_y⁺`.
///
/// Because `D⁻ = -(D⁺)ᵀ` on the torus, the result is symmetric negative
/// semidefinite for every positive `a`, and each row sums to zero.
pub fn build_modified_laplacian(a: &Field, grid: &GridSpec) -> Result<SparseOperator> {
    check_conductivity(a, grid)?;
    let mut total: Option<SparseOperator> = None;
    for axis in [Axis::X, Axis::Y] {
        let fwd = build_difference(axis, Direction::Forward, grid)?;
        let bwd = build_difference(axis, Direction::Backward, grid)?;
        let term = bwd.matmul(&fwd.scale_rows(a.as_slice())?)?;
        total = Some(match total {
            None => term,
            Some(t) => t.add(&term)?,
        });
    }
    Ok(total.expect("two axes"))
}

/// First-order wave generator `[[0, I], [A_h, 0]]` on the stacked state `(u, v)`.
pub fn build_wave_generator(a: &Field, grid: &GridSpec) -> Result<SparseOperator> {
    let lap = build_modified_laplacian(a, grid)?;
    let p = grid.points();
    let mut triplets = Vec::with_capacity(p + lap.nnz());
    for r in 0..p {
        triplets.push((r, p + r, 1.0));
    }
    for (r, c, v) in lap.triplets() {
        triplets.push((p + r, c, v));
    }
    SparseOperator::from_triplets(2 * p, 2 * p, &triplets)
}

/// Patch-averaging tokenizer.
///
/// Token `(I, J)` sits at row `(n/patch) * I + J` and averages the pixels
/// `(patch*I + a, patch*J + b)` for `a, b < patch`. In wave mode the matrix
/// has `2n²` columns and reads only the amplitude block.
pub fn build_tokenizer_matrix(grid: &GridSpec, patch: usize, wave_mode: bool) -> Result<SparseOperator> {
    grid.validate()?;
    if patch == 0 || grid.n % patch != 0 {
        return Err(Error::param(format!(
            "patch {patch} does not divide grid side {}",
            grid.n
        )));
    }
    let n = grid.n;
    let t = n / patch;
    let w = 1.0 / (patch * patch) as f64;
    let mut triplets = Vec::with_capacity(n * n);
    for ti in 0..t {
        for tj in 0..t {
            let row = ti * t + tj;
            for a in 0..patch {
                for b in 0..patch {
                    triplets.push((row, grid.index(patch * ti + a, patch * tj + b), w));
                }
            }
        }
    }
    let cols = if wave_mode { 2 * n * n } else { n * n };
    SparseOperator::from_triplets(t * t, cols, &triplets)
}

/// Averages over consecutive non-overlapping windows of a periodic line.
pub fn build_line_tokenizer(n: usize, window: usize) -> Result<SparseOperator> {
    if window == 0 || n % window != 0 {
        return Err(Error::param(format!("window {window} does not divide line length {n}")));
    }
    let w = 1.0 / window as f64;
    let triplets: Vec<_> = (0..n).map(|i| (i / window, i, w)).collect();
    SparseOperator::from_triplets(n / window, n, &triplets)
}
