//! Data preparation shared by the learning verbs and the experiment harnesses.

use rayon::prelude::*;
use tokenobs::dataset::{normalize_dataset, Dataset, Normalization};
use tokenobs::learners::{fit_map, FittedMap, HistoryDesign, Learner, MapRole};
use tokenobs::solvers::Trajectory;
use tokenobs::tokenizer::tokenize_trajectory;
use tokenobs::Result;

/// Token sequences of each trajectory, or the frames themselves for a tokenized dataset.
pub fn token_sequences(trajs: &[Trajectory], patch: Option<usize>) -> Result<Vec<Vec<Vec<f64>>>> {
    trajs
        .par_iter()
        .map(|t| match patch {
            Some(p) => tokenize_trajectory(t, p),
            None => Ok(t.frames.clone()),
        })
        .collect()
}

/// Observed-field sequences (amplitude blocks) of each trajectory.
pub fn field_sequences(trajs: &[Trajectory]) -> Vec<Vec<Vec<f64>>> {
    trajs
        .iter()
        .map(|t| (0..t.len()).map(|i| t.amplitude(i).to_vec()).collect())
        .collect()
}

/// Normalize in place when asked; returns the constants in force.
pub fn prepare(dataset: &mut Dataset, normalize: bool) -> Result<Option<Normalization>> {
    if normalize {
        Ok(Some(normalize_dataset(dataset)?))
    } else {
        Ok(dataset.manifest.normalization.filter(|n| n.applied))
    }
}

/// Patch to tokenize with: `None` when the dataset already holds tokens.
pub fn dataset_patch(dataset: &Dataset, requested: Option<usize>) -> Option<usize> {
    if dataset.manifest.token_patch.is_some() {
        None
    } else {
        requested.or_else(|| dataset.manifest.recipe.as_ref().map(|r| r.patch)).or(Some(4))
    }
}

/// Build the design for one role and fit it.
pub fn fit_role(
    trajs: &[Trajectory],
    patch: Option<usize>,
    role: MapRole,
    k: usize,
    learner: &Learner,
    eval: Option<&[Trajectory]>,
) -> Result<FittedMap> {
    let design = |ts: &[Trajectory]| -> Result<HistoryDesign> {
        let tokens = token_sequences(ts, patch)?;
        match role {
            MapRole::Autoregressive => HistoryDesign::autoregressive(tokens, k),
            MapRole::Reconstruction => HistoryDesign::reconstruction(tokens, field_sequences(ts), k),
        }
    };
    let train = design(trajs)?;
    let held = eval.map(design).transpose()?;
    fit_map(
        &train,
        held.as_ref().map(|d| d as &dyn tokenobs::learners::DesignSource),
        role,
        k,
        learner,
    )
}
