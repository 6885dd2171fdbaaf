//! Row-at-a-time access to regression problems.
//!
//! Design matrices for the history sweeps reach hundreds of thousands of
//! rows by a thousand columns, so learners never materialise them; they
//! pull rows from a [`DesignSource`] in blocks.

use crate::error::{Error, Result};
use crate::solvers::Trajectory;
use crate::tokenizer::tokenize_trajectory;

pub trait DesignSource: Sync {
    /// Length of one input row (without any bias column).
    fn n_features(&self) -> usize;
    fn n_targets(&self) -> usize;
    fn n_samples(&self) -> usize;
    /// Write sample `i` into `features` and `targets`.
    fn fill(&self, i: usize, features: &mut [f64], targets: &mut [f64]);
}

/// Explicit list of `(input, target)` pairs.
#[derive(Clone, Debug, Default)]
pub struct PairDesign {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl PairDesign {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::param(format!(
                "need matching non-empty inputs and targets, got {} and {}",
                inputs.len(),
                targets.len()
            )));
        }
        let (p, q) = (inputs[0].len(), targets[0].len());
        if inputs.iter().any(|x| x.len() != p) || targets.iter().any(|y| y.len() != q) {
            return Err(Error::dim("all samples must share their input and target lengths"));
        }
        Ok(PairDesign { inputs, targets })
    }
}

impl DesignSource for PairDesign {
    fn n_features(&self) -> usize {
        self.inputs[0].len()
    }

    fn n_targets(&self) -> usize {
        self.targets[0].len()
    }

    fn n_samples(&self) -> usize {
        self.inputs.len()
    }

    fn fill(&self, i: usize, features: &mut [f64], targets: &mut [f64]) {
        features.copy_from_slice(&self.inputs[i]);
        targets.copy_from_slice(&self.targets[i]);
    }
}

/// History windows over a set of tokenized trajectories.
///
/// In autoregressive mode sample `(s, t)` maps tokens `t-k+1..=t` of
/// sequence `s` to tokens `t+1`; in reconstruction mode it maps the same
/// window to the raw state at `t`.
pub struct HistoryDesign {
    tokens: Vec<Vec<Vec<f64>>>,
    states: Option<Vec<Vec<Vec<f64>>>>,
    k: usize,
    offsets: Vec<usize>,
}

impl HistoryDesign {
    /// Autoregressive windows over pre-tokenized sequences.
    pub fn autoregressive(tokens: Vec<Vec<Vec<f64>>>, k: usize) -> Result<Self> {
        Self::build(tokens, None, k)
    }

    /// Reconstruction windows; `states[s][t]` is the raw frame matching `tokens[s][t]`.
    pub fn reconstruction(tokens: Vec<Vec<Vec<f64>>>, states: Vec<Vec<Vec<f64>>>, k: usize) -> Result<Self> {
        if states.len() != tokens.len() || states.iter().zip(&tokens).any(|(s, t)| s.len() != t.len()) {
            return Err(Error::dim("state and token sequences must align"));
        }
        Self::build(tokens, Some(states), k)
    }

    /// Tokenize trajectories and build autoregressive windows.
    pub fn from_trajectories(trajs: &[Trajectory], k: usize, patch: usize) -> Result<Self> {
        let tokens = trajs
            .iter()
            .map(|t| tokenize_trajectory(t, patch))
            .collect::<Result<Vec<_>>>()?;
        Self::autoregressive(tokens, k)
    }

    fn build(tokens: Vec<Vec<Vec<f64>>>, states: Option<Vec<Vec<Vec<f64>>>>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("history length must be >= 1"));
        }
        if tokens.is_empty() {
            return Err(Error::param("no sequences given"));
        }
        let m = tokens[0].first().map(Vec::len).unwrap_or(0);
        if m == 0 || tokens.iter().flatten().any(|f| f.len() != m) {
            return Err(Error::dim("token frames must be non-empty and share their length"));
        }
        let reconstruct = states.is_some();
        let mut offsets = vec![0];
        for seq in &tokens {
            let count = if reconstruct {
                (seq.len() + 1).saturating_sub(k)
            } else {
                seq.len().saturating_sub(k)
            };
            offsets.push(offsets.last().unwrap() + count);
        }
        if *offsets.last().unwrap() == 0 {
            return Err(Error::param(format!("sequences are too short for history length {k}")));
        }
        Ok(HistoryDesign {
            tokens,
            states,
            k,
            offsets,
        })
    }

    pub fn history_len(&self) -> usize {
        self.k
    }

    pub fn token_dim(&self) -> usize {
        self.tokens[0][0].len()
    }

    pub fn sequences(&self) -> &[Vec<Vec<f64>>] {
        &self.tokens
    }

    /// `(sequence, newest history index)` of sample `i`.
    pub fn locate(&self, i: usize) -> (usize, usize) {
        let s = self.offsets.partition_point(|&o| o <= i) - 1;
        (s, i - self.offsets[s] + self.k - 1)
    }
}

impl DesignSource for HistoryDesign {
    fn n_features(&self) -> usize {
        self.k * self.token_dim()
    }

    fn n_targets(&self) -> usize {
        match &self.states {
            Some(states) => states[0][0].len(),
            None => self.token_dim(),
        }
    }

    fn n_samples(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn fill(&self, i: usize, features: &mut [f64], targets: &mut [f64]) {
        let (s, t) = self.locate(i);
        let m = self.token_dim();
        for (slot, frame) in self.tokens[s][t + 1 - self.k..=t].iter().enumerate() {
            features[slot * m..(slot + 1) * m].copy_from_slice(frame);
        }
        match &self.states {
            Some(states) => targets.copy_from_slice(&states[s][t]),
            None => targets.copy_from_slice(&self.tokens[s][t + 1]),
        }
    }
}
