//! Residues, temporal correlation and nearest-subvideo distance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidueNorm {
    /// Mean absolute error over pixels.
    L1,
    /// Mean squared error over pixels.
    L2,
    /// Maximum absolute error over pixels.
    Linf,
}

impl ResidueNorm {
    pub fn name(self) -> &'static str {
        match self {
            ResidueNorm::L1 => "l1",
            ResidueNorm::L2 => "l2",
            ResidueNorm::Linf => "linf",
        }
    }
}

impl std::str::FromStr for ResidueNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(ResidueNorm::L1),
            "l2" => Ok(ResidueNorm::L2),
            "linf" | "l_inf" | "max" => Ok(ResidueNorm::Linf),
            other => Err(Error::param(format!("unknown residue norm {other:?}"))),
        }
    }
}

/// Residue of one frame pair.
pub fn frame_residue(pred: &[f64], truth: &[f64], norm: ResidueNorm) -> f64 {
    let diffs = pred.iter().zip(truth).map(|(p, t)| (p - t).abs());
    match norm {
        ResidueNorm::L1 => diffs.sum::<f64>() / pred.len() as f64,
        ResidueNorm::L2 => diffs.map(|d| d * d).sum::<f64>() / pred.len() as f64,
        ResidueNorm::Linf => diffs.fold(0.0, f64::max),
    }
}

/// Per-frame residues between equally shaped frame sequences.
pub fn frame_residues(pred: &[Vec<f64>], truth: &[Vec<f64>], norm: ResidueNorm) -> Result<Vec<f64>> {
    if pred.len() != truth.len() {
        return Err(Error::dim(format!("{} predicted frames vs {} true frames", pred.len(), truth.len())));
    }
    if let Some(t) = (0..pred.len()).find(|&t| pred[t].len() != truth[t].len() || pred[t].is_empty()) {
        return Err(Error::dim(format!(
            "frame {t}: {} predicted values vs {} true values",
            pred[t].len(),
            truth[t].len()
        )));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| frame_residue(p, t, norm)).collect())
}

/// Per-frame residues over the observed fields of two trajectories.
pub fn residue_norms(pred: &Trajectory, truth: &Trajectory, norm: ResidueNorm) -> Result<Vec<f64>> {
    if pred.layout != truth.layout {
        return Err(Error::dim(format!("layouts differ: {:?} vs {:?}", pred.layout, truth.layout)));
    }
    let p: Vec<Vec<f64>> = (0..pred.len()).map(|t| pred.amplitude(t).to_vec()).collect();
    let q: Vec<Vec<f64>> = (0..truth.len()).map(|t| truth.amplitude(t).to_vec()).collect();
    frame_residues(&p, &q, norm)
}

/// `ρ(Δt)` for `Δt = 0..=dt_max`, mean and spread over an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub lags: Vec<usize>,
    pub mean: Vec<f64>,
    /// Sample standard deviation across videos; zero for a single video.
    pub std: Vec<f64>,
    pub pixel: (usize, usize),
    pub ensemble_size: usize,
}

/// Pearson correlation of `series[..T-Δt]` with `series[Δt..]` for each lag.
pub fn pearson_lags(series: &[f64], dt_max: usize) -> Result<Vec<f64>> {
    if series.len() <= dt_max + 1 {
        return Err(Error::param(format!(
            "series of length {} is too short for lags up to {dt_max}",
            series.len()
        )));
    }
    (0..=dt_max)
        .map(|lag| {
            let (x, y) = (&series[..series.len() - lag], &series[lag..]);
            let n = x.len() as f64;
            let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
            let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
            for (a, b) in x.iter().zip(y) {
                let (da, db) = (a - mx, b - my);
                sxy += da * db;
                sxx += da * da;
                syy += db * db;
            }
            if !(sxx > 0.0 && syy > 0.0) {
                return Err(Error::Degenerate(format!("pixel series has zero variance at lag {lag}")));
            }
            if lag == 0 {
                return Ok(1.0);
            }
            Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
        })
        .collect()
}

fn pixel_series(video: &Trajectory, pixel: (usize, usize)) -> Result<Vec<f64>> {
    let n = video.layout.side();
    let (i, j) = pixel;
    let idx = match video.layout {
        crate::grid::StateLayout::Line { .. } if j == 0 && i < n => i,
        crate::grid::StateLayout::Scalar { .. } | crate::grid::StateLayout::Wave { .. } if i < n && j < n => {
            n * i + j
        }
        _ => {
            return Err(Error::param(format!(
                "pixel {pixel:?} is outside a {:?} frame",
                video.layout
            )))
        }
    };
    Ok(video.frames.iter().map(|f| f[idx]).collect())
}

/// Temporal correlation of one pixel (`(i, j)` with flat index `n i + j`) in one video.
pub fn temporal_correlation(video: &Trajectory, pixel: (usize, usize), dt_max: usize) -> Result<CorrelationSeries> {
    let rho = pearson_lags(&pixel_series(video, pixel)?, dt_max)?;
    Ok(CorrelationSeries {
        lags: (0..=dt_max).collect(),
        std: vec![0.0; rho.len()],
        mean: rho,
        pixel,
        ensemble_size: 1,
    })
}

/// Mean and sample standard deviation of `ρ(Δt)` across videos.
///
/// Videos whose pixel series is degenerate are skipped with a warning; at
/// least two usable videos must remain.
pub fn correlation_ensemble_stats(
    videos: &[Trajectory],
    pixel: (usize, usize),
    dt_max: usize,
) -> Result<CorrelationSeries> {
    if videos.len() < 2 {
        return Err(Error::param(format!("need at least 2 videos, got {}", videos.len())));
    }
    let per_video: Vec<Result<CorrelationSeries>> = videos
        .par_iter()
        .map(|v| temporal_correlation(v, pixel, dt_max))
        .collect();
    let mut series = Vec::with_capacity(videos.len());
    for (i, r) in per_video.into_iter().enumerate() {
        match r {
            Ok(s) => series.push(s.mean),
            Err(Error::Degenerate(msg)) => log::warn!("video {i} excluded from correlation statistics: {msg}"),
            Err(e) => return Err(e),
        }
    }
    if series.len() < 2 {
        return Err(Error::Degenerate(format!(
            "only {} of {} videos have a usable pixel series",
            series.len(),
            videos.len()
        )));
    }
    let count = series.len() as f64;
    let lags = dt_max + 1;
    let mean: Vec<f64> = (0..lags).map(|l| series.iter().map(|s| s[l]).sum::<f64>() / count).collect();
    let std = (0..lags)
        .map(|l| (series.iter().map(|s| (s[l] - mean[l]).powi(2)).sum::<f64>() / (count - 1.0)).sqrt())
        .collect();
    Ok(CorrelationSeries {
        lags: (0..lags).collect(),
        mean,
        std,
        pixel,
        ensemble_size: series.len(),
    })
}

/// `min_v ‖clip − v‖₂` over every window of `clip.len()` consecutive reference frames.
///
/// Clips and windows are flattened frame-major, each frame in its own
/// storage order (row-major for fields).
pub fn nearest_subvideo_distance(clip: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64> {
    let nc = clip.len();
    if nc == 0 {
        return Err(Error::param("clip has no frames"));
    }
    if reference.len() < nc {
        return Err(Error::param(format!(
            "reference has {} frames, fewer than the clip length {nc}",
            reference.len()
        )));
    }
    let dim = clip[0].len();
    if clip.iter().chain(reference).any(|f| f.len() != dim) {
        return Err(Error::dim("clip and reference frames must share one size"));
    }
    let best = (0..=reference.len() - nc)
        .into_par_iter()
        .map(|start| {
            let mut sum = 0.0;
            for (c, r) in clip.iter().zip(&reference[start..start + nc]) {
                for (a, b) in c.iter().zip(r) {
                    sum += (a - b) * (a - b);
                }
            }
            sum
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(best.sqrt())
}

/// [`nearest_subvideo_distance`] on trajectories, requiring a clip of exactly `nc` frames.
pub fn nearest_subvideo_distance_traj(clip: &Trajectory, reference: &Trajectory, nc: usize) -> Result<f64> {
    if clip.len() != nc {
        return Err(Error::param(format!("clip has {} frames, expected {nc}", clip.len())));
    }
    nearest_subvideo_distance(&clip.frames, &reference.frames)
}
