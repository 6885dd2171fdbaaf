//! Closed-loop rollout of a fitted autoregressive map.

use crate::error::{Error, Result};
use crate::learners::{LinearMap, MapRole};
use crate::tokenizer::TokenHistory;

/// Tokens (and optionally reconstructed fields) of one rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutResult {
    /// Seed frames followed by generated frames; `seed_len + steps` in total.
    pub tokens: Vec<Vec<f64>>,
    /// One reconstructed field per generated frame, `fields[i]` matching `tokens[seed_len + i]`.
    pub fields: Option<Vec<Vec<f64>>>,
    pub seed_len: usize,
    /// `false` for seed frames, `true` for generated ones.
    pub generated: Vec<bool>,
}

impl RolloutResult {
    pub fn generated_tokens(&self) -> &[Vec<f64>] {
        &self.tokens[self.seed_len..]
    }
}

fn check_role(map: &LinearMap, role: MapRole, what: &str) -> Result<()> {
    map.validate()?;
    if map.meta.role != role {
        return Err(Error::param(format!("{what} must be a {role:?} map, got {:?}", map.meta.role)));
    }
    Ok(())
}

fn check_finite(v: &[f64], step: usize, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            step,
            what: format!("non-finite {what}"),
        })
    }
}

/// Predict the next frame, append it and drop the oldest, `steps` times.
///
/// The seed may be longer than the map's history; only its last `k`
/// frames enter the first prediction. Step indices in divergence errors count generated frames from 1.
pub fn autoregressive_rollout(g_map: &LinearMap, seed: &TokenHistory, steps: usize) -> Result<RolloutResult> {
    rollout(g_map, None, seed, steps)
}

/// Roll out `g_map` and reconstruct a field at every generated frame with
/// `recon_map` applied to the most recent `k'` token frames (including the new one).
pub fn full_pipeline_rollout(
    g_map: &LinearMap,
    recon_map: &LinearMap,
    seed: &TokenHistory,
    steps: usize,
) -> Result<RolloutResult> {
    check_role(recon_map, MapRole::Reconstruction, "reconstruction map")?;
    if recon_map.meta.frame_dim != g_map.meta.frame_dim {
        return Err(Error::dim(format!(
            "maps disagree on token dimension: {} vs {}",
            g_map.meta.frame_dim, recon_map.meta.frame_dim
        )));
    }
    if recon_map.history_len() > seed.len() + 1 {
        return Err(Error::param(format!(
            "reconstruction history {} exceeds the {} frames available at the first generated step",
            recon_map.history_len(),
            seed.len() + 1
        )));
    }
    rollout(g_map, Some(recon_map), seed, steps)
}

fn rollout(g_map: &LinearMap, recon: Option<&LinearMap>, seed: &TokenHistory, steps: usize) -> Result<RolloutResult> {
    check_role(g_map, MapRole::Autoregressive, "autoregressive map")?;
    let k = g_map.history_len();
    if seed.len() < k {
        return Err(Error::param(format!("seed has {} frames, map needs {k}", seed.len())));
    }
    if seed.token_dim() != g_map.meta.frame_dim || g_map.out_dim() != g_map.meta.frame_dim {
        return Err(Error::dim(format!(
            "seed tokens have length {}, map works on {}",
            seed.token_dim(),
            g_map.meta.frame_dim
        )));
    }
    let mut tokens = seed.frames.clone();
    let mut fields = recon.map(|_| Vec::with_capacity(steps));
    let m = seed.token_dim();
    let mut window = seed.frames[seed.len() - k..].concat();
    for step in 1..=steps {
        let next = g_map.apply(&window)?;
        check_finite(&next, step, "token prediction")?;
        window.drain(..m);
        window.extend_from_slice(&next);
        tokens.push(next);
        if let (Some(r), Some(out)) = (recon, fields.as_mut()) {
            let kr = r.history_len();
            let input = tokens[tokens.len() - kr..].concat();
            let field = r.apply(&input)?;
            check_finite(&field, step, "reconstructed field")?;
            out.push(field);
        }
    }
    let seed_len = seed.len();
    let mut generated = vec![false; seed_len];
    generated.resize(seed_len + steps, true);
    Ok(RolloutResult {
        tokens,
        fields,
        seed_len,
        generated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::Mat;

    fn shift_map() -> LinearMap {
        // y(t+1) = 0.5 y(t) + 0.25 y(t-1), componentwise on 2 tokens
        let mut g = LinearMap::zeros(MapRole::Autoregressive, 2, 2, 2, false);
        g.weights = Mat::from_fn(2, 4, |i, j| match j {
            _ if j == i => 0.25,
            _ if j == i + 2 => 0.5,
            _ => 0.0,
        });
        g
    }

    #[test]
    fn zero_steps_returns_seed() {
        let seed = TokenHistory::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let r = autoregressive_rollout(&shift_map(), &seed, 0).unwrap();
        assert_eq!(r.tokens, seed.frames);
        assert_eq!(r.generated, vec![false, false]);
    }

    #[test]
    fn recurrence_is_followed_and_seed_kept() {
        let seed = TokenHistory::new(vec![vec![1.0, -1.0], vec![2.0, 0.0]]).unwrap();
        let r = autoregressive_rollout(&shift_map(), &seed, 3).unwrap();
        assert_eq!(&r.tokens[..2], &seed.frames[..]);
        assert_eq!(r.tokens[2], vec![0.5 * 2.0 + 0.25, 0.25 * -1.0]);
        assert_eq!(r.tokens.len(), 5);
        assert_eq!(r.generated_tokens().len(), 3);
    }

    #[test]
    fn blow_up_reports_step() {
        let mut g = LinearMap::zeros(MapRole::Autoregressive, 1, 1, 1, false);
        g.weights[(0, 0)] = 1e300;
        let seed = TokenHistory::new(vec![vec![1.0]]).unwrap();
        match autoregressive_rollout(&g, &seed, 5) {
            Err(Error::Divergence { step, .. }) => assert_eq!(step, 2),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn pipeline_reconstructs_each_generated_frame() {
        let mut recon = LinearMap::zeros(MapRole::Reconstruction, 1, 2, 3, true);
        recon.weights = Mat::from_fn(3, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        recon.bias = Some(vec![0.0, 0.0, 7.0]);
        let seed = TokenHistory::new(vec![vec![1.0, -1.0], vec![2.0, 0.0]]).unwrap();
        let r = full_pipeline_rollout(&shift_map(), &recon, &seed, 4).unwrap();
        let fields = r.fields.unwrap();
        assert_eq!(fields.len(), 4);
        for (f, t) in fields.iter().zip(&r.tokens[2..]) {
            assert_eq!(f, &vec![t[0], t[1], 7.0]);
        }
        assert!(full_pipeline_rollout(&recon, &recon, &seed, 1).is_err());
    }
}
