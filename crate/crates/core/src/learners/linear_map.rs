use std::io::{Read, Write};
use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a fitted map predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapRole {
    /// Next token frame from a token history.
    Autoregressive,
    /// Full state at the newest history time.
    Reconstruction,
}

/// Shape and provenance stored alongside the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub role: MapRole,
    pub history_len: usize,
    pub frame_dim: usize,
    pub out_dim: usize,
    pub has_bias: bool,
    /// Affine normalization applied to the data before fitting (`x' = scale * x + offset`).
    #[serde(default)]
    pub normalization: Option<(f64, f64)>,
    /// Free-form record of how the map was produced (learner, ridge, seed, ...).
    #[serde(default)]
    pub provenance: toml::Table,
}

/// Dense affine map from an oldest-first flattened history to an output vector.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    /// `out_dim x (history_len * frame_dim)`
    pub weights: Mat<f64>,
    pub bias: Option<Vec<f64>>,
    pub meta: MapMetadata,
}

impl LinearMap {
    pub fn zeros(role: MapRole, history_len: usize, frame_dim: usize, out_dim: usize, bias: bool) -> Self {
        LinearMap {
            weights: Mat::zeros(out_dim, history_len * frame_dim),
            bias: bias.then(|| vec![0.0; out_dim]),
            meta: MapMetadata {
                role,
                history_len,
                frame_dim,
                out_dim,
                has_bias: bias,
                normalization: None,
                provenance: toml::Table::new(),
            },
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn history_len(&self) -> usize {
        self.meta.history_len
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.meta;
        if self.weights.nrows() != m.out_dim || self.weights.ncols() != m.history_len * m.frame_dim {
            return Err(Error::dim(format!(
                "weights are {}x{}, metadata says {}x{}",
                self.weights.nrows(),
                self.weights.ncols(),
                m.out_dim,
                m.history_len * m.frame_dim
            )));
        }
        if self.bias.is_some() != m.has_bias || self.bias.as_ref().is_some_and(|b| b.len() != m.out_dim) {
            return Err(Error::dim("bias does not match metadata"));
        }
        let finite = (0..self.weights.ncols())
            .all(|j| (0..self.weights.nrows()).all(|i| self.weights[(i, j)].is_finite()));
        if !finite || self.bias.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("linear map has non-finite entries".into()));
        }
        Ok(())
    }

    /// `W x + b`.
    pub fn apply(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dim() {
            return Err(Error::dim(format!(
                "map expects input of length {}, got {}",
                self.in_dim(),
                input.len()
            )));
        }
        let mut out = self.bias.clone().unwrap_or_else(|| vec![0.0; self.out_dim()]);
        for (j, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let col = self.weights.col(j);
            for (o, w) in out.iter_mut().zip(col.iter()) {
                *o += w * x;
            }
        }
        Ok(out)
    }

    /// Binary layout:
    ///
    /// ```text
    /// magic b"LMAP", version u32 LE (= 1), header length u64 LE,
    /// header: UTF-8 TOML of `MapMetadata`,
    /// weights: out_dim * in_dim f64 LE, row-major,
    /// bias: out_dim f64 LE (only when has_bias)
    /// ```
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let header = toml::to_string(&self.meta).map_err(std::io::Error::other)?;
        w.write_all(b"LMAP")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(header.as_bytes())?;
        for i in 0..self.weights.nrows() {
            for j in 0..self.weights.ncols() {
                w.write_all(&self.weights[(i, j)].to_le_bytes())?;
            }
        }
        for b in self.bias.iter().flatten() {
            w.write_all(&b.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> std::io::Result<Result<Self>> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"LMAP" {
            return Ok(Err(Error::param("not a linear map file (bad magic)")));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != 1 {
            return Ok(Err(Error::param(format!("unsupported linear map version {version}"))));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let mut header = vec![0u8; u64::from_le_bytes(b8) as usize];
        r.read_exact(&mut header)?;
        let meta: MapMetadata = match std::str::from_utf8(&header)
            .map_err(|e| e.to_string())
            .and_then(|s| toml::from_str(s).map_err(|e| e.to_string()))
        {
            Ok(m) => m,
            Err(e) => return Ok(Err(Error::param(format!("bad linear map header: {e}")))),
        };
        let (rows, cols) = (meta.out_dim, meta.history_len * meta.frame_dim);
        let mut next = |r: &mut dyn Read| -> std::io::Result<f64> {
            r.read_exact(&mut b8)?;
            Ok(f64::from_le_bytes(b8))
        };
        let mut weights = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                weights[(i, j)] = next(&mut r)?;
            }
        }
        let bias = if meta.has_bias {
            Some((0..rows).map(|_| next(&mut r)).collect::<std::io::Result<Vec<_>>>()?)
        } else {
            None
        };
        let map = LinearMap { weights, bias, meta };
        Ok(map.validate().map(|_| map))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::dataset::write_atomic(path, |w| self.write_to(w))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file)).map_err(|e| Error::io(path, e))?
    }
}
