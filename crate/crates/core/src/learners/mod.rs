//! Linear autoregressive and reconstruction maps.

pub mod design;
pub mod linear_map;
pub mod lstsq;
pub mod sgd;
pub mod sweep;

pub use design::{DesignSource, HistoryDesign, PairDesign};
pub use linear_map::{LinearMap, MapMetadata, MapRole};
pub use lstsq::{fit_least_squares, LstsqFit, LstsqOptions, LstsqReport};
pub use sgd::{evaluate_mse, fit_sgd, mse_loss_and_grad, CurvePoint, SgdFit, TrainConfig};
pub use sweep::{history_sweep, SweepConfig, SweepPoint};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::{HistorySample, ReconstructionSample};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum Learner {
    Lstsq { ridge: f64, bias: bool },
    Sgd(TrainConfig),
}

impl Default for Learner {
    fn default() -> Self {
        Learner::Lstsq { ridge: 0.0, bias: true }
    }
}

impl Learner {
    pub fn name(&self) -> &'static str {
        match self {
            Learner::Lstsq { .. } => "lstsq",
            Learner::Sgd(_) => "sgd",
        }
    }
}

/// A fitted map plus whatever diagnostics its learner produced.
#[derive(Clone, Debug)]
pub struct FittedMap {
    pub map: LinearMap,
    pub lstsq: Option<LstsqReport>,
    pub curve: Vec<CurvePoint>,
}

/// Fit a map of the given role from any design source.
///
/// `frame_dim * history_len` must equal the source's feature count.
pub fn fit_map(
    train: &dyn DesignSource,
    eval: Option<&dyn DesignSource>,
    role: MapRole,
    history_len: usize,
    learner: &Learner,
) -> Result<FittedMap> {
    if history_len == 0 || train.n_features() % history_len != 0 {
        return Err(Error::dim(format!(
            "{} features do not split into {history_len} frames",
            train.n_features()
        )));
    }
    let frame_dim = train.n_features() / history_len;
    let out_dim = train.n_targets();
    let (weights, bias, lstsq, curve) = match learner {
        Learner::Lstsq { ridge, bias } => {
            let fit = fit_least_squares(
                train,
                &LstsqOptions {
                    ridge: *ridge,
                    bias: *bias,
                    block_rows: 0,
                },
            )?;
            if fit.report.rank_deficient {
                log::info!(
                    "least-squares design is rank deficient ({} of {}); returning the minimum-norm solution",
                    fit.report.rank,
                    fit.report.unknowns_per_output
                );
            }
            (fit.weights, fit.bias, Some(fit.report), Vec::new())
        }
        Learner::Sgd(cfg) => {
            let fit = fit_sgd(train, eval, cfg)?;
            (fit.weights, fit.bias, None, fit.curve)
        }
    };
    let mut map = LinearMap::zeros(role, history_len, frame_dim, out_dim, bias.is_some());
    map.weights = weights;
    map.bias = bias;
    map.meta.provenance.insert("learner".into(), learner.name().into());
    match learner {
        Learner::Lstsq { ridge, .. } => {
            map.meta.provenance.insert("ridge".into(), (*ridge).into());
        }
        Learner::Sgd(cfg) => {
            map.meta.provenance.insert("learning_rate".into(), cfg.learning_rate.into());
            map.meta.provenance.insert("steps".into(), (cfg.steps as i64).into());
            map.meta.provenance.insert("batch_size".into(), (cfg.batch_size as i64).into());
            map.meta.provenance.insert("seed".into(), (cfg.seed as i64).into());
        }
    }
    if let Some(r) = &lstsq {
        map.meta.provenance.insert("rank".into(), (r.rank as i64).into());
        map.meta.provenance.insert("rank_deficient".into(), r.rank_deficient.into());
    }
    map.validate()?;
    Ok(FittedMap { map, lstsq, curve })
}

fn pairs_from_histories(samples: &[HistorySample]) -> Result<(PairDesign, usize)> {
    let k = samples.first().map(|s| s.history.len()).unwrap_or(0);
    if samples.iter().any(|s| s.history.len() != k) {
        return Err(Error::dim("all samples must share their history length"));
    }
    let design = PairDesign::new(
        samples.iter().map(|s| s.history.flatten()).collect(),
        samples.iter().map(|s| s.target.clone()).collect(),
    )?;
    Ok((design, k))
}

/// Autoregressive map from explicit history samples.
pub fn fit_autoregressive(samples: &[HistorySample], learner: &Learner) -> Result<FittedMap> {
    let (design, k) = pairs_from_histories(samples)?;
    fit_map(&design, None, MapRole::Autoregressive, k, learner)
}

/// Reconstruction map from token histories to full states.
pub fn fit_superres(samples: &[ReconstructionSample], learner: &Learner) -> Result<FittedMap> {
    let k = samples.first().map(|s| s.history.len()).unwrap_or(0);
    if samples.iter().any(|s| s.history.len() != k) {
        return Err(Error::dim("all samples must share their history length"));
    }
    let design = PairDesign::new(
        samples.iter().map(|s| s.history.flatten()).collect(),
        samples.iter().map(|s| s.state.clone()).collect(),
    )?;
    fit_map(&design, None, MapRole::Reconstruction, k, learner)
}
