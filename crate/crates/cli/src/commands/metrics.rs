use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tokenobs::dataset::read_dataset;
use tokenobs::rollout_metrics::{
    correlation_ensemble_stats, frame_residues, nearest_subvideo_distance, write_correlation_csv,
    write_frame_series_csv, write_scalar_csv, ResidueNorm,
};
use tokenobs::solvers::Trajectory;

use super::required;
use crate::config::{load_section, resolve, write_run_manifest, Flags};
use crate::error::{CliError, CliResult};
use crate::MetricsArgs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// residues, correlation or subvideo_distance.
    pub metric: String,
    pub pred: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub truth_init: usize,
    pub truth_start: usize,
    pub pixel: Vec<usize>,
    pub dt_max: usize,
    pub video_len: Option<usize>,
    pub clip_len: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            metric: "residues".into(),
            pred: None,
            truth: None,
            truth_init: 0,
            truth_start: 0,
            pixel: vec![0, 0],
            dt_max: 50,
            video_len: None,
            clip_len: None,
            out: None,
        }
    }
}

fn provenance(config: &MetricsConfig) -> Vec<(String, String)> {
    let mut p = vec![("metric".to_string(), config.metric.clone())];
    if let Some(t) = &config.truth {
        p.push(("truth".into(), t.display().to_string()));
    }
    if let Some(t) = &config.pred {
        p.push(("pred".into(), t.display().to_string()));
    }
    p
}

/// Non-overlapping videos of `len` frames cut from each trajectory.
fn cut_videos(trajs: &[Trajectory], len: Option<usize>) -> Vec<Trajectory> {
    match len {
        None => trajs.to_vec(),
        Some(l) => trajs
            .iter()
            .flat_map(|t| (0..t.len() / l).map(move |c| t.slice(c * l, (c + 1) * l)))
            .collect(),
    }
}

pub fn metrics(a: MetricsArgs, cfg: Option<&Path>) -> CliResult<()> {
    let mut flags = Flags::default();
    let chosen = [
        (a.residues, "residues"),
        (a.correlation, "correlation"),
        (a.subvideo_distance, "subvideo_distance"),
    ]
    .into_iter()
    .find(|(on, _)| *on)
    .map(|(_, name)| name);
    flags
        .set("metric", chosen)
        .set_path("pred", a.pred.as_deref())
        .set_path("truth", a.truth.as_deref())
        .set_usize("truth_init", a.truth_init)
        .set_usize("truth_start", a.truth_start)
        .set(
            "pixel",
            a.pixel
                .clone()
                .map(|v| toml::Value::Array(v.into_iter().map(|x| toml::Value::Integer(x as i64)).collect())),
        )
        .set_usize("dt_max", a.dt_max)
        .set_usize("video_len", a.video_len)
        .set_usize("clip_len", a.clip_len)
        .set_path("out", a.out.as_deref());
    let config: MetricsConfig = resolve(&MetricsConfig::default(), &load_section(cfg, "metrics")?, &flags.0, "metrics")?;
    let out = required(config.out.clone(), "--out")?;
    let mut truth = read_dataset(&required(config.truth.clone(), "--truth")?)?;
    let pred = config.pred.as_deref().map(read_dataset).transpose()?;
    // Bring the reference into the prediction's normalized units.
    if let Some(n) = pred.as_ref().and_then(|p| p.manifest.normalization).filter(|n| n.applied) {
        if !truth.manifest.normalization.is_some_and(|t| t.applied) {
            for t in &mut truth.trajectories {
                n.apply(t);
            }
        }
    }
    let prov = provenance(&config);

    match config.metric.as_str() {
        "residues" => {
            let pred = required(pred, "--pred")?;
            let p = pred
                .trajectories
                .first()
                .ok_or_else(|| CliError::Usage("prediction dataset is empty".into()))?;
            let t = truth
                .trajectories
                .get(config.truth_init)
                .ok_or_else(|| CliError::Usage(format!("--truth-init {} out of range", config.truth_init)))?;
            let end = config.truth_start + p.len();
            if end > t.len() {
                return Err(CliError::Usage(format!(
                    "prediction of {} frames starting at {} runs past the {} reference frames",
                    p.len(),
                    config.truth_start,
                    t.len()
                )));
            }
            let pa: Vec<Vec<f64>> = (0..p.len()).map(|i| p.amplitude(i).to_vec()).collect();
            let ta: Vec<Vec<f64>> = (config.truth_start..end).map(|i| t.amplitude(i).to_vec()).collect();
            let cols: Vec<(&str, Vec<f64>)> = [ResidueNorm::L1, ResidueNorm::L2, ResidueNorm::Linf]
                .into_iter()
                .map(|n| Ok((n.name(), frame_residues(&pa, &ta, n)?)))
                .collect::<tokenobs::Result<_>>()?;
            let view: Vec<(&str, &[f64])> = cols.iter().map(|(n, c)| (*n, c.as_slice())).collect();
            write_frame_series_csv(&out, &prov, &view)?;
        }
        "correlation" => {
            if config.pixel.len() != 2 {
                return Err(CliError::Usage("--pixel takes two indices, i,j".into()));
            }
            let pixel = (config.pixel[0], config.pixel[1]);
            let mut series = vec![(
                "truth",
                correlation_ensemble_stats(&cut_videos(&truth.trajectories, config.video_len), pixel, config.dt_max)?,
            )];
            if let Some(pred) = &pred {
                series.push((
                    "pred",
                    correlation_ensemble_stats(&cut_videos(&pred.trajectories, config.video_len), pixel, config.dt_max)?,
                ));
            }
            let view: Vec<(&str, &_)> = series.iter().map(|(n, s)| (*n, s)).collect();
            write_correlation_csv(&out, &prov, &view)?;
        }
        "subvideo_distance" => {
            let pred = required(pred, "--pred")?;
            let clip = pred
                .trajectories
                .first()
                .ok_or_else(|| CliError::Usage("clip dataset is empty".into()))?;
            let nc = config.clip_len.unwrap_or(clip.len()).min(clip.len());
            let clip_frames: Vec<Vec<f64>> = (0..nc).map(|i| clip.amplitude(i).to_vec()).collect();
            let mut best = f64::INFINITY;
            for r in &truth.trajectories {
                if r.len() >= nc {
                    let amps: Vec<Vec<f64>> = (0..r.len()).map(|i| r.amplitude(i).to_vec()).collect();
                    best = best.min(nearest_subvideo_distance(&clip_frames, &amps)?);
                }
            }
            if !best.is_finite() {
                return Err(CliError::Usage(format!("no reference trajectory has {nc} frames")));
            }
            write_scalar_csv(&out, &prov, &[("nearest_subvideo_distance", best), ("clip_len", nc as f64)])?;
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown metric {other:?}; pick --residues, --correlation or --subvideo-distance"
            )))
        }
    }
    write_run_manifest(&super::sibling(&out, ".run.toml"), "metrics", &config, None)
}
