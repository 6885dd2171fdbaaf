//! Dataset recipes and the generators that run them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec, StateLayout};
use crate::lattice_ops::{build_modified_laplacian, build_wave_generator};
use crate::random_fields::{build_conductivity, sample_matern_field, GrfParams};
use crate::solvers::{simulate_kse1d, simulate_kse2d, simulate_linear, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationKind {
    Heat,
    Wave,
    Kse2d,
    Kse1d,
}

impl std::str::FromStr for EquationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heat" => Ok(EquationKind::Heat),
            "wave" => Ok(EquationKind::Wave),
            "kse2d" | "kse" => Ok(EquationKind::Kse2d),
            "kse1d" => Ok(EquationKind::Kse1d),
            other => Err(Error::param(format!("unknown equation {other:?}"))),
        }
    }
}

/// How initial states are drawn. Init `i` of a dataset uses seed `seed + i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// Matérn random field (2D equations only).
    Grf { sigma: f64, m: f64, nu: f64 },
    /// `sin(mode π x / L)` along the first axis, `x_i = i L / n`; the same for every init.
    Sine { mode: f64 },
}

/// Conductivity of the heat and wave operators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConductivitySpec {
    Constant { value: f64 },
    /// `a = scale * exp(Z)` with `Z` a Matérn field of the given parameters and seed.
    Grf {
        scale: f64,
        sigma: f64,
        m: f64,
        nu: f64,
        seed: u64,
    },
}

impl ConductivitySpec {
    pub fn is_constant(&self) -> bool {
        matches!(self, ConductivitySpec::Constant { .. })
    }

    /// The constant field with the same scale, i.e. the `Z ≡ 0` member of the family.
    pub fn constant_counterpart(&self) -> ConductivitySpec {
        match *self {
            ConductivitySpec::Constant { value } => ConductivitySpec::Constant { value },
            ConductivitySpec::Grf { scale, .. } => ConductivitySpec::Constant { value: scale },
        }
    }

    pub fn build(&self, n: usize) -> Result<Field> {
        match *self {
            ConductivitySpec::Constant { value } => {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::param(format!("conductivity must be > 0, got {value}")));
                }
                Ok(Field::constant(n, value))
            }
            ConductivitySpec::Grf {
                scale,
                sigma,
                m,
                nu,
                seed,
            } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::param(format!("conductivity scale must be > 0, got {scale}")));
                }
                let a = build_conductivity(&GrfParams {
                    grid_size: n,
                    sigma,
                    m,
                    nu,
                    seed,
                })?;
                Ok(a.map(|v| scale * v))
            }
        }
    }
}

/// Everything needed to regenerate a dataset bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub equation: EquationKind,
    pub grid_size: usize,
    /// Lattice spacing of the heat and wave grids (KSE spacing is `domain_length / grid_size`).
    pub dx: f64,
    /// Integrator step.
    pub dt: f64,
    /// Integrator steps per stored frame.
    pub skip: usize,
    /// Stored frames kept per init, after burn-in.
    pub frames: usize,
    /// Stored frames discarded from the front.
    pub burn_in: usize,
    pub inits: usize,
    /// Base seed; init `i` draws its initial state from `seed + i`.
    pub seed: u64,
    pub initial: InitialCondition,
    pub conductivity: ConductivitySpec,
    /// Side length of the KSE domain.
    pub domain_length: f64,
    /// Patch side used when the dataset is tokenized.
    pub patch: usize,
    /// Leading fraction of inits used for training (and for normalization constants).
    pub train_fraction: f64,
}

impl GenerateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 || self.frames == 0 || self.inits == 0 || self.skip == 0 {
            return Err(Error::param("grid_size >= 2, frames >= 1, inits >= 1 and skip >= 1 are required"));
        }
        if !(self.dt > 0.0 && self.dx > 0.0) {
            return Err(Error::param("dt and dx must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return Err(Error::param(format!("train_fraction must lie in [0, 1], got {}", self.train_fraction)));
        }
        if self.patch == 0 || self.grid_size % self.patch != 0 {
            return Err(Error::param(format!(
                "patch {} must divide the grid size {}",
                self.patch, self.grid_size
            )));
        }
        if self.equation == EquationKind::Kse1d && matches!(self.initial, InitialCondition::Grf { .. }) {
            return Err(Error::param("1D KSE datasets need a sine initial condition"));
        }
        Ok(())
    }

    /// Number of leading inits that form the training split.
    pub fn train_count(&self) -> usize {
        ((self.inits as f64 * self.train_fraction).round() as usize).min(self.inits)
    }

    pub fn init_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }

    pub fn layout(&self) -> StateLayout {
        let n = self.grid_size;
        match self.equation {
            EquationKind::Heat | EquationKind::Kse2d => StateLayout::Scalar { n },
            EquationKind::Wave => StateLayout::Wave { n },
            EquationKind::Kse1d => StateLayout::Line { n },
        }
    }

    fn extent(&self) -> f64 {
        match self.equation {
            EquationKind::Kse1d | EquationKind::Kse2d => self.domain_length,
            _ => self.dx * self.grid_size as f64,
        }
    }

    /// Observed field at `t = 0` for init `index`.
    pub fn initial_field(&self, index: usize) -> Result<Vec<f64>> {
        let n = self.grid_size;
        match self.initial {
            InitialCondition::Grf { sigma, m, nu } => Ok(sample_matern_field(&GrfParams {
                grid_size: n,
                sigma,
                m,
                nu,
                seed: self.init_seed(index),
            })?
            .into_vec()),
            InitialCondition::Sine { mode } => {
                let (len, ext) = (n as f64, self.extent());
                let line: Vec<f64> = (0..n)
                    .map(|i| (mode * std::f64::consts::PI * (i as f64 * ext / len) / ext).sin())
                    .collect();
                Ok(match self.equation {
                    EquationKind::Kse1d => line,
                    _ => Field::from_fn(n, |i, _| line[i]).into_vec(),
                })
            }
        }
    }
}

/// Simulate init `index` of a recipe.
pub fn generate_trajectory(cfg: &GenerateConfig, index: usize) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cfg.grid_size;
    let u0 = cfg.initial_field(index)?;
    let stored = cfg.burn_in + cfg.frames;
    let steps = stored * cfg.skip;
    let mut traj = match cfg.equation {
        EquationKind::Heat | EquationKind::Wave => {
            let grid = GridSpec::new(n, cfg.dx)?;
            let a = cfg.conductivity.build(n)?;
            let (op, x0) = if cfg.equation == EquationKind::Heat {
                (build_modified_laplacian(&a, &grid)?, u0)
            } else {
                let mut x0 = u0;
                x0.resize(2 * n * n, 0.0);
                (build_wave_generator(&a, &grid)?, x0)
            };
            let mut t = simulate_linear(&op, &x0, cfg.layout(), cfg.dt, steps, cfg.skip)?;
            t.frames.drain(..cfg.burn_in);
            t.burn_in = cfg.burn_in;
            t
        }
        EquationKind::Kse2d => {
            let field = Field::from_vec(n, u0)?;
            simulate_kse2d(&field, cfg.domain_length, cfg.dt, steps, cfg.skip, cfg.burn_in)?
        }
        EquationKind::Kse1d => {
            let mut t = simulate_kse1d(&u0, cfg.domain_length, cfg.dt, steps)?;
            if cfg.skip > 1 {
                t.frames = t.frames.into_iter().step_by(cfg.skip).collect();
                t.dt *= cfg.skip as f64;
                t.skip = cfg.skip;
            }
            t.frames.drain(..cfg.burn_in);
            t.burn_in = cfg.burn_in;
            t
        }
    };
    traj.seed = Some(cfg.init_seed(index));
    Ok(traj)
}

/// Simulate every init of a recipe, in parallel across inits.
pub fn generate_trajectories(cfg: &GenerateConfig) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    (0..cfg.inits)
        .into_par_iter()
        .map(|i| generate_trajectory(cfg, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::presets;

    #[test]
    fn heat_recipe_shapes_and_seeds() {
        let cfg = GenerateConfig {
            grid_size: 8,
            frames: 5,
            burn_in: 2,
            inits: 3,
            patch: 4,
            ..presets::heat_lowres()
        };
        let trajs = generate_trajectories(&cfg).unwrap();
        assert_eq!(trajs.len(), 3);
        assert!(trajs.iter().all(|t| t.len() == 5 && t.burn_in == 2));
        assert_eq!(trajs[2].seed, Some(cfg.seed + 2));
        let again = generate_trajectory(&cfg, 1).unwrap();
        assert_eq!(again, trajs[1]);
    }

    #[test]
    fn wave_starts_at_rest() {
        let cfg = GenerateConfig {
            grid_size: 8,
            frames: 3,
            inits: 1,
            patch: 4,
            ..presets::wave_lowres()
        };
        let t = generate_trajectory(&cfg, 0).unwrap();
        assert_eq!(t.frames[0].len(), 128);
        assert!(t.frames[0][64..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sine_line_and_constant_counterpart() {
        let cfg = presets::kse1d_lie();
        let u0 = cfg.initial_field(0).unwrap();
        let x1 = cfg.domain_length / cfg.grid_size as f64;
        assert!((u0[1] - (7.0 * std::f64::consts::PI * x1 / cfg.domain_length).sin()).abs() < 1e-15);
        let c = presets::heat_lowres().conductivity.constant_counterpart();
        assert!(c.is_constant());
    }
}
