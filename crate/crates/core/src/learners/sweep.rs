//! Error as a function of history length.

use serde::{Deserialize, Serialize};

use super::design::{DesignSource, HistoryDesign};
use super::{fit_map, Learner, MapRole};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub learner: Learner,
}

/// Statistics over trials for one history length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub mean_l1: f64,
    pub std_l1: f64,
    pub mean_linf: f64,
    pub std_linf: f64,
    pub trial_l1: Vec<f64>,
    pub trial_linf: Vec<f64>,
    pub rank_deficient: bool,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One-step teacher-forced residues of a map over one held-out sequence:
/// mean absolute error and maximum absolute error over every predicted token.
pub fn one_step_errors(map: &super::LinearMap, sequence: &[Vec<f64>]) -> Result<(f64, f64)> {
    let design = HistoryDesign::autoregressive(vec![sequence.to_vec()], map.history_len())?;
    let (mut x, mut y) = (vec![0.0; design.n_features()], vec![0.0; design.n_targets()]);
    let (mut sum, mut max, mut count) = (0.0, 0.0f64, 0usize);
    for i in 0..design.n_samples() {
        design.fill(i, &mut x, &mut y);
        let pred = map.apply(&x)?;
        for (p, t) in pred.iter().zip(&y) {
            let e = (p - t).abs();
            sum += e;
            max = max.max(e);
        }
        count += y.len();
    }
    Ok((sum / count as f64, max))
}

/// Fit one map per history length on `train` and score it on held-out sequences.
///
/// Trial `t` evaluates on `eval[t]`; the trial count is capped at
/// `eval.len()` so every trial sees a distinct initial condition.
pub fn history_sweep(
    train: &[Vec<Vec<f64>>],
    eval: &[Vec<Vec<f64>>],
    config: &SweepConfig,
) -> Result<Vec<SweepPoint>> {
    if config.k_values.is_empty() {
        return Err(Error::param("k_values must not be empty"));
    }
    if config.trials == 0 {
        return Err(Error::param("trials must be >= 1"));
    }
    if eval.is_empty() {
        return Err(Error::param("no held-out sequences to evaluate on"));
    }
    if let Some(&k) = config.k_values.iter().find(|&&k| k == 0) {
        return Err(Error::param(format!("history length must be >= 1, got {k}")));
    }
    let trials = config.trials.min(eval.len());
    if trials < config.trials {
        log::warn!("only {} held-out sequences; running {trials} trials instead of {}", eval.len(), config.trials);
    }
    let mut out = Vec::with_capacity(config.k_values.len());
    for &k in &config.k_values {
        let design = HistoryDesign::autoregressive(train.to_vec(), k)?;
        let fitted = fit_map(&design, None, MapRole::Autoregressive, k, &config.learner)?;
        let mut l1 = Vec::with_capacity(trials);
        let mut linf = Vec::with_capacity(trials);
        for seq in &eval[..trials] {
            let (a, b) = one_step_errors(&fitted.map, seq)?;
            l1.push(a);
            linf.push(b);
        }
        let (mean_l1, std_l1) = mean_std(&l1);
        let (mean_linf, std_linf) = mean_std(&linf);
        log::info!("history {k}: mean L1 {mean_l1:.3e} (std {std_l1:.1e}), mean Linf {mean_linf:.3e}");
        out.push(SweepPoint {
            k,
            mean_l1,
            std_l1,
            mean_linf,
            std_linf,
            trial_l1: l1,
            trial_linf: linf,
            rank_deficient: fitted.lstsq.is_some_and(|r| r.rank_deficient),
        });
    }
    Ok(out)
}
