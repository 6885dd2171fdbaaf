//! Mini-batch Adam on the mean squared error.

use faer::Mat;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::design::DesignSource;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub ridge: f64,
    pub bias: bool,
    pub seed: u64,
    /// Learning rate at the last step as a fraction of the first (geometric decay); 1 keeps it constant.
    pub final_lr_fraction: f64,
    /// Evaluate the curve every this many steps (0 means only at the end).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            steps: 1000,
            batch_size: 512,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            ridge: 0.0,
            bias: true,
            seed: 0,
            final_lr_fraction: 1.0,
            eval_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::param("Adam moments must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) || !(self.ridge >= 0.0) {
            return Err(Error::param("epsilon must be > 0 and ridge >= 0"));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(Error::param("final_lr_fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// One point of the training curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub epoch: f64,
    /// Mean of the mini-batch losses since the previous point.
    pub train_mse: f64,
    pub test_mse: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SgdFit {
    pub weights: Mat<f64>,
    pub bias: Option<Vec<f64>>,
    pub curve: Vec<CurvePoint>,
}

/// Batch objective and its gradient.
///
/// `loss = Σ‖W x + b - y‖² / (B q) + penalty ‖W‖²` for a batch of `B`
/// rows (`inputs` is `B x p`, `targets` is `B x q`).
pub fn mse_loss_and_grad(
    weights: &Mat<f64>,
    bias: Option<&[f64]>,
    inputs: &Mat<f64>,
    targets: &Mat<f64>,
    penalty: f64,
) -> (f64, Mat<f64>, Option<Vec<f64>>) {
    let (b, q) = (inputs.nrows(), targets.ncols());
    let mut resid = inputs * weights.transpose() - targets;
    if let Some(bias) = bias {
        for j in 0..q {
            for i in 0..b {
                resid[(i, j)] += bias[j];
            }
        }
    }
    let scale = 1.0 / (b * q) as f64;
    let loss = scale * resid.squared_norm_l2() + penalty * weights.squared_norm_l2();
    let mut grad_w = resid.transpose() * inputs;
    grad_w *= faer::Scale(2.0 * scale);
    if penalty > 0.0 {
        grad_w += weights * faer::Scale(2.0 * penalty);
    }
    let grad_b = bias.map(|_| {
        (0..q)
            .map(|j| 2.0 * scale * (0..b).map(|i| resid[(i, j)]).sum::<f64>())
            .collect()
    });
    (loss, grad_w, grad_b)
}

fn gather(source: &dyn DesignSource, idx: &[usize]) -> (Mat<f64>, Mat<f64>) {
    let (p, q) = (source.n_features(), source.n_targets());
    let mut x = Mat::zeros(idx.len(), p);
    let mut y = Mat::zeros(idx.len(), q);
    let (mut xr, mut yr) = (vec![0.0; p], vec![0.0; q]);
    for (r, &i) in idx.iter().enumerate() {
        source.fill(i, &mut xr, &mut yr);
        for (j, v) in xr.iter().enumerate() {
            x[(r, j)] = *v;
        }
        for (j, v) in yr.iter().enumerate() {
            y[(r, j)] = *v;
        }
    }
    (x, y)
}

/// Mean squared error of `W x + b` over a whole source.
pub fn evaluate_mse(weights: &Mat<f64>, bias: Option<&[f64]>, source: &dyn DesignSource) -> f64 {
    let n = source.n_samples();
    let all: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for chunk in all.chunks(4096) {
        let (x, y) = gather(source, chunk);
        let (loss, _, _) = mse_loss_and_grad(weights, bias, &x, &y, 0.0);
        total += loss * chunk.len() as f64;
    }
    total / n as f64
}

/// Adam from a zero map.
///
/// The penalty is `ridge / (N q)` so the optimum coincides with the ridge
/// least-squares solution for the same data.
pub fn fit_sgd(train: &dyn DesignSource, eval: Option<&dyn DesignSource>, config: &TrainConfig) -> Result<SgdFit> {
    config.validate()?;
    let n = train.n_samples();
    let (p, q) = (train.n_features(), train.n_targets());
    if n == 0 {
        return Err(Error::param("no training samples"));
    }
    if let Some(e) = eval {
        if e.n_features() != p || e.n_targets() != q {
            return Err(Error::dim("evaluation samples do not match the training shapes"));
        }
    }
    let mut weights = Mat::<f64>::zeros(q, p);
    let mut bias = config.bias.then(|| vec![0.0; q]);
    let mut m_w = Mat::<f64>::zeros(q, p);
    let mut v_w = Mat::<f64>::zeros(q, p);
    let mut m_b = vec![0.0; q];
    let mut v_b = vec![0.0; q];
    let penalty = config.ridge / (n * q) as f64;
    let batch = config.batch_size.min(n);
    let decay = config.final_lr_fraction.powf(1.0 / config.steps.max(1) as f64);

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut curve = Vec::new();
    let (mut since, mut acc) = (0usize, 0.0);
    let mut lr = config.learning_rate;

    for step in 1..=config.steps {
        if cursor + batch > n {
            perm.shuffle(&mut rng);
            cursor = 0;
        }
        let mut idx = perm[cursor..cursor + batch].to_vec();
        cursor += batch;
        idx.sort_unstable();
        let (x, y) = gather(train, &idx);
        let (loss, gw, gb) = mse_loss_and_grad(&weights, bias.as_deref(), &x, &y, penalty);
        if !loss.is_finite() {
            return Err(Error::Divergence {
                step,
                what: format!("training loss became {loss}"),
            });
        }
        acc += loss;
        since += 1;

        let (b1, b2) = (config.beta1, config.beta2);
        let c1 = 1.0 - b1.powi(step as i32);
        let c2 = 1.0 - b2.powi(step as i32);
        for j in 0..p {
            for i in 0..q {
                let g = gw[(i, j)];
                m_w[(i, j)] = b1 * m_w[(i, j)] + (1.0 - b1) * g;
                v_w[(i, j)] = b2 * v_w[(i, j)] + (1.0 - b2) * g * g;
                weights[(i, j)] -= lr * (m_w[(i, j)] / c1) / ((v_w[(i, j)] / c2).sqrt() + config.epsilon);
            }
        }
        if let (Some(b), Some(g)) = (bias.as_mut(), gb) {
            for o in 0..q {
                m_b[o] = b1 * m_b[o] + (1.0 - b1) * g[o];
                v_b[o] = b2 * v_b[o] + (1.0 - b2) * g[o] * g[o];
                b[o] -= lr * (m_b[o] / c1) / ((v_b[o] / c2).sqrt() + config.epsilon);
            }
        }
        lr *= decay;

        let at_eval = config.eval_every > 0 && step % config.eval_every == 0;
        if at_eval || step == config.steps {
            curve.push(CurvePoint {
                step,
                epoch: (step * batch) as f64 / n as f64,
                train_mse: acc / since as f64,
                test_mse: eval.map(|e| evaluate_mse(&weights, bias.as_deref(), e)),
            });
            acc = 0.0;
            since = 0;
        }
    }
    Ok(SgdFit { weights, bias, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::design::PairDesign;

    #[test]
    fn zero_steps_returns_zero_map() {
        let d = PairDesign::new(vec![vec![1.0, 2.0]], vec![vec![3.0]]).unwrap();
        let fit = fit_sgd(
            &d,
            None,
            &TrainConfig {
                steps: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(fit.weights, Mat::<f64>::zeros(1, 2));
        assert_eq!(fit.bias, Some(vec![0.0]));
        assert!(fit.curve.is_empty());
    }

    #[test]
    fn learns_a_scalar_line() {
        let xs: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 50.0]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![3.0 * x[0] - 1.0]).collect();
        let d = PairDesign::new(xs, ys).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.05,
            steps: 4000,
            batch_size: 50,
            final_lr_fraction: 1e-3,
            ..Default::default()
        };
        let fit = fit_sgd(&d, Some(&d), &cfg).unwrap();
        assert!((fit.weights[(0, 0)] - 3.0).abs() < 1e-4);
        assert!((fit.bias.unwrap()[0] + 1.0).abs() < 1e-4);
        assert!(fit.curve.last().unwrap().test_mse.unwrap() < 1e-8);
    }

    #[test]
    fn huge_learning_rate_on_wild_data_reports_divergence() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![1e200 * i as f64]).collect();
        let ys: Vec<Vec<f64>> = (0..10).map(|_| vec![1e200]).collect();
        let d = PairDesign::new(xs, ys).unwrap();
        let err = fit_sgd(
            &d,
            None,
            &TrainConfig {
                learning_rate: 1.0,
                steps: 10,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { step: 1, .. }));
    }

    #[test]
    fn rejects_bad_config() {
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
