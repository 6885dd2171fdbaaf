//! Global affine normalization to `[-1, 1]`.
//!
//! Constants come from the observed fields of the training split only and
//! are then applied to every trajectory. The offset goes on the observed
//! field and the scale on the whole state (wave momenta are scaled, not
//! shifted); constants lie in the kernel of every generator in this crate,
//! so normalized states obey the same linear dynamics as raw ones.

use serde::{Deserialize, Serialize};

use super::store::Dataset;
use crate::error::{Error, Result};
use crate::solvers::Trajectory;

/// `x' = scale * x + offset` on observed values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
    pub scale: f64,
    pub offset: f64,
    /// All training values equal: identity scale, offset moving the value to 0.
    pub constant: bool,
    /// Whether stored values are already normalized.
    pub applied: bool,
}

impl Normalization {
    /// Min and max over the observed fields of `trajs`.
    pub fn range_of(trajs: &[Trajectory]) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in trajs {
            for i in 0..t.len() {
                for &v in t.amplitude(i) {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }

    pub fn from_range(min: f64, max: f64, applied: bool) -> Self {
        if max > min {
            let scale = 2.0 / (max - min);
            Normalization {
                min,
                max,
                scale,
                offset: -1.0 - min * scale,
                constant: false,
                applied,
            }
        } else {
            Normalization {
                min,
                max,
                scale: 1.0,
                offset: -min,
                constant: true,
                applied,
            }
        }
    }

    pub fn fit(train: &[Trajectory]) -> Result<Self> {
        let (lo, hi) = Self::range_of(train);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::param("normalization needs finite, non-empty training data"));
        }
        if lo == hi {
            log::warn!("training data is constant ({lo}); normalization only shifts it to 0");
        }
        Ok(Self::from_range(lo, hi, false))
    }

    pub fn forward(&self, v: f64) -> f64 {
        self.scale * v + self.offset
    }

    pub fn inverse(&self, v: f64) -> f64 {
        (v - self.offset) / self.scale
    }

    fn map_traj(&self, traj: &mut Trajectory, f: impl Fn(f64, bool) -> f64) {
        let obs = traj.layout.amplitude_len();
        for frame in &mut traj.frames {
            for (i, v) in frame.iter_mut().enumerate() {
                *v = f(*v, i < obs);
            }
        }
    }

    pub fn apply(&self, traj: &mut Trajectory) {
        self.map_traj(traj, |v, obs| if obs { self.forward(v) } else { self.scale * v });
    }

    pub fn invert(&self, traj: &mut Trajectory) {
        self.map_traj(traj, |v, obs| if obs { self.inverse(v) } else { v / self.scale });
    }
}

/// Fit constants on the training split, apply them to every trajectory and
/// record them in the manifest. A dataset that is already normalized is left alone.
pub fn normalize_dataset(dataset: &mut Dataset) -> Result<Normalization> {
    if let Some(n) = dataset.manifest.normalization.filter(|n| n.applied) {
        return Ok(n);
    }
    if dataset.manifest.train_count == 0 {
        return Err(Error::param("normalization needs a non-empty training split"));
    }
    let mut norm = Normalization::fit(dataset.train())?;
    for t in &mut dataset.trajectories {
        norm.apply(t);
    }
    norm.applied = true;
    dataset.manifest.normalization = Some(norm);
    Ok(norm)
}
