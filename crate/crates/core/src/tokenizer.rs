//! Patch-average tokens and the history windows built from them.

use crate::error::{Error, Result};
use crate::grid::StateLayout;
use crate::solvers::Trajectory;

/// Token vector of one frame, `(n/patch)²` values in row-major patch order.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenFrame {
    pub values: Vec<f64>,
    pub source: StateLayout,
    pub patch: usize,
}

/// `k` consecutive token frames, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenHistory {
    pub frames: Vec<Vec<f64>>,
}

impl TokenHistory {
    pub fn new(frames: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::param("token history needs at least one frame"));
        };
        let m = first.len();
        if frames.iter().any(|f| f.len() != m) {
            return Err(Error::dim("token frames in a history must share their length"));
        }
        Ok(TokenHistory { frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn token_dim(&self) -> usize {
        self.frames[0].len()
    }

    /// Oldest-first concatenation, the input layout of a linear map.
    pub fn flatten(&self) -> Vec<f64> {
        self.frames.concat()
    }

    /// Append `next` and drop the oldest frame.
    pub fn push(&mut self, next: Vec<f64>) {
        self.frames.remove(0);
        self.frames.push(next);
    }
}

/// Number of tokens a layout produces at a given patch size.
pub fn token_count(layout: StateLayout, patch: usize) -> Result<usize> {
    let n = layout.side();
    if patch == 0 || n % patch != 0 {
        return Err(Error::param(format!("patch {patch} does not divide grid side {n}")));
    }
    Ok(match layout {
        StateLayout::Line { .. } => n / patch,
        _ => (n / patch) * (n / patch),
    })
}

/// Average the amplitude part of `state` over `patch x patch` blocks
/// (consecutive windows of `patch` points for line layouts).
pub fn tokenize_values(state: &[f64], layout: StateLayout, patch: usize) -> Result<Vec<f64>> {
    let count = token_count(layout, patch)?;
    if state.len() != layout.len() {
        return Err(Error::dim(format!(
            "state of length {} does not match layout of size {}",
            state.len(),
            layout.len()
        )));
    }
    let n = layout.side();
    if let StateLayout::Line { .. } = layout {
        return Ok(state
            .chunks_exact(patch)
            .map(|w| w.iter().sum::<f64>() / patch as f64)
            .collect());
    }
    let t = n / patch;
    let mut out = vec![0.0; count];
    for i in 0..n {
        let row = &state[i * n..(i + 1) * n];
        let base = (i / patch) * t;
        for (tj, chunk) in row.chunks_exact(patch).enumerate() {
            out[base + tj] += chunk.iter().sum::<f64>();
        }
    }
    let w = 1.0 / (patch * patch) as f64;
    out.iter_mut().for_each(|v| *v *= w);
    Ok(out)
}

pub fn tokenize(state: &[f64], layout: StateLayout, patch: usize) -> Result<TokenFrame> {
    Ok(TokenFrame {
        values: tokenize_values(state, layout, patch)?,
        source: layout,
        patch,
    })
}

/// Tokenize every frame of a trajectory.
pub fn tokenize_trajectory(traj: &Trajectory, patch: usize) -> Result<Vec<Vec<f64>>> {
    traj.frames
        .iter()
        .map(|f| tokenize_values(f, traj.layout, patch))
        .collect()
}

/// One training pair for the autoregressive map.
#[derive(Clone, Debug, PartialEq)]
pub struct HistorySample {
    /// Frames `t-k+1 ..= t`.
    pub history: TokenHistory,
    /// Tokens of frame `t+1`.
    pub target: Vec<f64>,
    /// Observed field (amplitude block) of frame `t+1`, when requested.
    pub field_target: Option<Vec<f64>>,
    /// Index `t` of the newest history frame.
    pub time: usize,
}

/// All windows of `k` token frames followed by the next frame, one per valid `t`.
///
/// A trajectory of length `L` yields `L - k` samples.
pub fn build_histories(traj: &Trajectory, k: usize, patch: usize, with_fields: bool) -> Result<Vec<HistorySample>> {
    if k == 0 {
        return Err(Error::param("history length must be >= 1"));
    }
    if traj.len() <= k {
        return Err(Error::param(format!(
            "trajectory of {} frames is too short for history length {k}",
            traj.len()
        )));
    }
    let tokens = tokenize_trajectory(traj, patch)?;
    Ok((k - 1..traj.len() - 1)
        .map(|t| HistorySample {
            history: TokenHistory {
                frames: tokens[t + 1 - k..=t].to_vec(),
            },
            target: tokens[t + 1].clone(),
            field_target: with_fields.then(|| traj.amplitude(t + 1).to_vec()),
            time: t,
        })
        .collect())
}

/// One training pair for the reconstruction map: tokens `t-k+1 ..= t` and the observed field of frame `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionSample {
    pub history: TokenHistory,
    pub state: Vec<f64>,
    pub time: usize,
}

/// Reconstruction pairs aligned on the newest history frame; `L - k + 1` per trajectory.
pub fn build_reconstruction_samples(traj: &Trajectory, k: usize, patch: usize) -> Result<Vec<ReconstructionSample>> {
    if k == 0 {
        return Err(Error::param("history length must be >= 1"));
    }
    if traj.len() < k {
        return Err(Error::param(format!(
            "trajectory of {} frames is too short for history length {k}",
            traj.len()
        )));
    }
    let tokens = tokenize_trajectory(traj, patch)?;
    Ok((k - 1..traj.len())
        .map(|t| ReconstructionSample {
            history: TokenHistory {
                frames: tokens[t + 1 - k..=t].to_vec(),
            },
            state: traj.amplitude(t).to_vec(),
            time: t,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Field, GridSpec};
    use crate::lattice_ops::build_tokenizer_matrix;
    use crate::solvers::Equation;

    fn ramp(len: usize, n: usize) -> Trajectory {
        let frames = (0..len).map(|t| vec![t as f64; n * n]).collect();
        Trajectory::new(StateLayout::Scalar { n }, frames, 1.0, Equation::Synthetic).unwrap()
    }

    #[test]
    fn constant_field_gives_constant_tokens() {
        let tok = tokenize(&[2.5; 64], StateLayout::Scalar { n: 8 }, 4).unwrap();
        assert_eq!(tok.values, vec![2.5; 4]);
        let big = tokenize(&vec![1.0; 128 * 128], StateLayout::Scalar { n: 128 }, 4).unwrap();
        assert_eq!(big.values.len(), 32 * 32);
    }

    #[test]
    fn indicator_of_one_patch() {
        let n = 8;
        let f = Field::from_fn(n, |i, j| if (4..8).contains(&i) && j < 4 { 1.0 } else { 0.0 });
        let tok = tokenize_values(f.as_slice(), StateLayout::Scalar { n }, 4).unwrap();
        assert_eq!(tok, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn wave_states_tokenize_amplitude_only() {
        let n = 4;
        let mut state = vec![1.0; n * n];
        state.extend(vec![100.0; n * n]);
        let tok = tokenize_values(&state, StateLayout::Wave { n }, 2).unwrap();
        assert_eq!(tok, vec![1.0; 4]);
    }

    #[test]
    fn matches_sparse_matrix() {
        let n = 12;
        let f = Field::from_fn(n, |i, j| ((i * 31 + j * 17) % 11) as f64 - 5.0);
        let h = build_tokenizer_matrix(&GridSpec::unit(n).unwrap(), 3, false).unwrap();
        let direct = tokenize_values(f.as_slice(), StateLayout::Scalar { n }, 3).unwrap();
        let via = h.apply(f.as_slice()).unwrap();
        for (a, b) in direct.iter().zip(&via) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn indivisible_patch_is_rejected() {
        assert!(tokenize_values(&[0.0; 25], StateLayout::Scalar { n: 5 }, 2).is_err());
        assert!(tokenize_values(&[0.0; 10], StateLayout::Line { n: 10 }, 3).is_err());
    }

    #[test]
    fn sample_counts() {
        assert_eq!(build_histories(&ramp(5, 4), 4, 2, false).unwrap().len(), 1);
        assert_eq!(build_histories(&ramp(2000, 4), 16, 2, false).unwrap().len(), 1984);
        assert!(build_histories(&ramp(4, 4), 4, 2, false).is_err());
        assert!(build_histories(&ramp(4, 4), 0, 2, false).is_err());
        assert_eq!(build_reconstruction_samples(&ramp(10, 4), 7, 2).unwrap().len(), 4);
    }

    #[test]
    fn windows_are_contiguous_and_oldest_first() {
        let samples = build_histories(&ramp(10, 4), 3, 2, true).unwrap();
        for s in &samples {
            let firsts: Vec<f64> = s.history.frames.iter().map(|f| f[0]).collect();
            let t = s.time as f64;
            assert_eq!(firsts, vec![t - 2.0, t - 1.0, t]);
            assert_eq!(s.target[0], t + 1.0);
            assert_eq!(s.field_target.as_ref().unwrap()[0], t + 1.0);
        }
        let recon = build_reconstruction_samples(&ramp(10, 4), 3, 2).unwrap();
        for s in &recon {
            assert_eq!(s.history.frames[2][0], s.time as f64);
            assert_eq!(s.state[0], s.time as f64);
        }
    }

    #[test]
    fn shifting_the_trajectory_shifts_histories() {
        let traj = ramp(12, 4);
        let a = build_histories(&traj, 4, 2, false).unwrap();
        let b = build_histories(&traj.slice(1, 12), 4, 2, false).unwrap();
        assert_eq!(a.len(), b.len() + 1);
        for (x, y) in a[1..].iter().zip(&b) {
            assert_eq!(x.history, y.history);
            assert_eq!(x.target, y.target);
        }
    }

    #[test]
    fn history_push_drops_oldest() {
        let mut h = TokenHistory::new(vec![vec![0.0], vec![1.0]]).unwrap();
        h.push(vec![2.0]);
        assert_eq!(h.flatten(), vec![1.0, 2.0]);
        assert!(TokenHistory::new(vec![]).is_err());
        assert!(TokenHistory::new(vec![vec![0.0], vec![1.0, 2.0]]).is_err());
    }
}
