//! Time integrators and the trajectories they produce.

mod etdrk;
mod euler;
mod kse;

pub use etdrk::{etdrk_coefficients, EtdrkCoefficients, DEFAULT_CONTOUR_POINTS};
pub use euler::{simulate_linear, step_forward_euler};
pub use kse::{kse1d_symbol, simulate_kse1d, simulate_kse2d, Kse1dStepper, Kse2dStepper};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::StateLayout;

/// Which system generated a trajectory, with the parameters needed to rebuild its dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "equation", rename_all = "snake_case")]
pub enum Equation {
    Heat,
    Wave,
    Kse2d { domain_length: f64 },
    Kse1d { domain_length: f64 },
    Synthetic,
}

/// Time-ordered frames sharing one layout.
///
/// `dt` is the time between *stored* frames; `skip` is the number of
/// integrator steps per stored frame and `burn_in` the number of stored
/// frames dropped from the front.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub layout: StateLayout,
    pub frames: Vec<Vec<f64>>,
    pub dt: f64,
    pub skip: usize,
    pub burn_in: usize,
    pub equation: Equation,
    pub seed: Option<u64>,
}

impl Trajectory {
    pub fn new(layout: StateLayout, frames: Vec<Vec<f64>>, dt: f64, equation: Equation) -> Result<Self> {
        let traj = Trajectory {
            layout,
            frames,
            dt,
            skip: 1,
            burn_in: 0,
            equation,
            seed: None,
        };
        traj.validate()?;
        Ok(traj)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::param("trajectory has no frames"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::param(format!("trajectory dt must be > 0, got {}", self.dt)));
        }
        let len = self.layout.len();
        if let Some((i, f)) = self.frames.iter().enumerate().find(|(_, f)| f.len() != len) {
            return Err(Error::dim(format!(
                "frame {i} has {} values, layout needs {len}",
                f.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Observed part of frame `t` (the amplitude block for wave states).
    pub fn amplitude(&self, t: usize) -> &[f64] {
        &self.frames[t][..self.layout.amplitude_len()]
    }

    /// Copy of frames `start..end` with the same metadata.
    pub fn slice(&self, start: usize, end: usize) -> Trajectory {
        Trajectory {
            frames: self.frames[start..end].to_vec(),
            ..self.clone()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

pub(crate) fn check_finite(state: &[f64], step: usize) -> Result<()> {
    if state.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            step,
            what: "non-finite state".into(),
        })
    }
}
