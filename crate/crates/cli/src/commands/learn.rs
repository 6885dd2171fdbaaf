use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tokenobs::dataset::{read_dataset, write_dataset, Dataset, Normalization};
use tokenobs::grid::StateLayout;
use tokenobs::learners::{history_sweep, Learner, LinearMap, MapRole, SweepConfig};
use tokenobs::rollout_metrics::{
    autoregressive_rollout, frame_residues, write_columns_csv, full_pipeline_rollout, write_frame_series_csv, ResidueNorm,
};
use tokenobs::solvers::{Equation, Trajectory};
use tokenobs::tokenizer::TokenHistory;

use super::{required, sibling};
use crate::config::{load_section, resolve, write_run_manifest, Flags};
use crate::error::{CliError, CliResult};
use crate::pipeline::{dataset_patch, fit_role, prepare, token_sequences};
use crate::{FitArgs, LearnerArgs, RolloutArgs, SweepArgs};

fn learner_flags(a: &LearnerArgs, seed: Option<u64>) -> toml::Table {
    let mut f = Flags::default();
    f.set("learner", a.learner.clone())
        .set("ridge", a.ridge)
        .set("learning_rate", a.lr)
        .set_usize("steps", a.steps)
        .set_usize("batch_size", a.batch_size)
        .set_u64("seed", seed);
    if a.no_bias {
        f.set("bias", Some(false));
    }
    f.0
}

pub fn parse_role(role: &str) -> CliResult<MapRole> {
    match role {
        "g" | "autoregressive" => Ok(MapRole::Autoregressive),
        "G" | "reconstruction" => Ok(MapRole::Reconstruction),
        other => Err(CliError::Usage(format!("--role must be g or G, got {other:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub data: Option<PathBuf>,
    pub role: String,
    pub k: usize,
    pub patch: Option<usize>,
    pub normalize: bool,
    pub out: Option<PathBuf>,
    pub learner: Learner,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            data: None,
            role: "g".into(),
            k: 16,
            patch: None,
            normalize: true,
            out: None,
            learner: Learner::default(),
        }
    }
}

pub fn fit_config(a: &FitArgs, cfg: Option<&Path>, seed: Option<u64>) -> CliResult<FitConfig> {
    let mut flags = Flags::default();
    flags
        .set_path("data", a.data.as_deref())
        .set("role", a.role.clone())
        .set_usize("k", a.k)
        .set_usize("patch", a.patch)
        .set_path("out", a.out.as_deref())
        .nested("learner", learner_flags(&a.learner, seed));
    if a.no_normalize {
        flags.set("normalize", Some(false));
    }
    resolve(&FitConfig::default(), &load_section(cfg, "fit")?, &flags.0, "fit")
}

pub fn fit(a: FitArgs, cfg: Option<&Path>, seed: Option<u64>) -> CliResult<()> {
    let config = fit_config(&a, cfg, seed)?;
    let data = required(config.data.clone(), "--data")?;
    let out = required(config.out.clone(), "--out")?;
    let role = parse_role(&config.role)?;
    let mut ds = read_dataset(&data)?;
    let norm = prepare(&mut ds, config.normalize)?;
    let patch = dataset_patch(&ds, config.patch);
    let eval = (!ds.test().is_empty()).then(|| ds.test());
    let mut fitted = fit_role(ds.train(), patch, role, config.k, &config.learner, eval)?;
    fitted.map.meta.normalization = norm.map(|n| (n.scale, n.offset));
    fitted.map.save(&out)?;

    let mut report = toml::Table::new();
    if let Some(r) = &fitted.lstsq {
        report.insert("lstsq".into(), toml::Value::try_from(r).map_err(|e| CliError::Config(e.to_string()))?);
    }
    if !fitted.curve.is_empty() {
        let curve = toml::Value::try_from(&fitted.curve).map_err(|e| CliError::Config(e.to_string()))?;
        report.insert("curve".into(), curve);
    }
    let text = toml::to_string(&report).map_err(|e| CliError::Config(e.to_string()))?;
    tokenobs::dataset::write_atomic(&sibling(&out, ".report.toml"), |w| w.write_all(text.as_bytes()))?;
    write_run_manifest(&sibling(&out, ".run.toml"), "fit", &config, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepFileConfig {
    pub data: Option<PathBuf>,
    pub k_list: Vec<usize>,
    pub trials: usize,
    pub patch: Option<usize>,
    pub normalize: bool,
    pub out: Option<PathBuf>,
    pub learner: Learner,
}

impl Default for SweepFileConfig {
    fn default() -> Self {
        SweepFileConfig {
            data: None,
            k_list: vec![1, 2, 4, 8, 12, 16, 20],
            trials: 20,
            patch: None,
            normalize: true,
            out: None,
            learner: Learner::default(),
        }
    }
}

pub fn sweep(a: SweepArgs, cfg: Option<&Path>, seed: Option<u64>) -> CliResult<()> {
    let mut flags = Flags::default();
    flags
        .set_path("data", a.data.as_deref())
        .set(
            "k_list",
            a.k_list
                .clone()
                .map(|v| toml::Value::Array(v.into_iter().map(|k| toml::Value::Integer(k as i64)).collect())),
        )
        .set_usize("trials", a.trials)
        .set_usize("patch", a.patch)
        .set_path("out", a.out.as_deref())
        .nested("learner", learner_flags(&a.learner, seed));
    if a.no_normalize {
        flags.set("normalize", Some(false));
    }
    let config: SweepFileConfig = resolve(&SweepFileConfig::default(), &load_section(cfg, "sweep")?, &flags.0, "sweep")?;
    let data = required(config.data.clone(), "--data")?;
    let out = required(config.out.clone(), "--out")?;
    let mut ds = read_dataset(&data)?;
    prepare(&mut ds, config.normalize)?;
    if ds.test().is_empty() {
        return Err(CliError::Usage("the dataset has no held-out split to evaluate on".into()));
    }
    let patch = dataset_patch(&ds, config.patch);
    let train = token_sequences(ds.train(), patch)?;
    let eval = token_sequences(ds.test(), patch)?;
    let points = history_sweep(
        &train,
        &eval,
        &SweepConfig {
            k_values: config.k_list.clone(),
            trials: config.trials,
            learner: config.learner.clone(),
        },
    )?;
    let ks: Vec<f64> = points.iter().map(|p| p.k as f64).collect();
    let trials: Vec<f64> = points.iter().map(|p| p.trial_l1.len() as f64).collect();
    let cols: Vec<(&str, Vec<f64>)> = vec![
        ("history_len", ks),
        ("mean_l1", points.iter().map(|p| p.mean_l1).collect()),
        ("std_l1", points.iter().map(|p| p.std_l1).collect()),
        ("mean_linf", points.iter().map(|p| p.mean_linf).collect()),
        ("std_linf", points.iter().map(|p| p.std_linf).collect()),
        ("trials", trials),
        ("rank_deficient", points.iter().map(|p| p.rank_deficient as u8 as f64).collect()),
    ];
    let provenance = vec![
        ("units".to_string(), "normalized token values, one-step teacher-forced".to_string()),
        ("data".to_string(), data.display().to_string()),
        ("learner".to_string(), config.learner.name().to_string()),
    ];
    let view: Vec<(&str, &[f64])> = cols.iter().map(|(n, c)| (*n, c.as_slice())).collect();
    write_columns_csv(&out, &provenance, &view)?;
    write_run_manifest(&sibling(&out, ".run.toml"), "sweep", &config, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutConfig {
    pub data: Option<PathBuf>,
    pub g_map: Option<PathBuf>,
    pub recon_map: Option<PathBuf>,
    pub pipeline: bool,
    pub init: usize,
    pub start: usize,
    pub seed_frames: Option<usize>,
    pub steps: usize,
    pub normalize: bool,
    pub out: Option<PathBuf>,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            data: None,
            g_map: None,
            recon_map: None,
            pipeline: false,
            init: 0,
            start: 0,
            seed_frames: None,
            steps: 100,
            normalize: true,
            out: None,
        }
    }
}

fn one_traj(frames: Vec<Vec<f64>>, layout: StateLayout, dt: f64, norm: Option<Normalization>) -> tokenobs::Result<Dataset> {
    let t = Trajectory::new(layout, frames, dt, Equation::Synthetic)?;
    let mut ds = Dataset::new(vec![t], None, 0)?;
    ds.manifest.normalization = norm;
    Ok(ds)
}

pub fn rollout(a: RolloutArgs, cfg: Option<&Path>) -> CliResult<()> {
    let mut flags = Flags::default();
    flags
        .set_path("data", a.data.as_deref())
        .set_path("g_map", a.g_map.as_deref())
        .set_path("recon_map", a.recon_map.as_deref())
        .set_usize("init", a.init)
        .set_usize("start", a.start)
        .set_usize("seed_frames", a.seed_frames)
        .set_usize("steps", a.steps)
        .set_path("out", a.out.as_deref());
    if a.pipeline {
        flags.set("pipeline", Some(true));
    }
    if a.no_normalize {
        flags.set("normalize", Some(false));
    }
    let config: RolloutConfig = resolve(&RolloutConfig::default(), &load_section(cfg, "rollout")?, &flags.0, "rollout")?;
    let out = required(config.out.clone(), "--out")?;
    let g = LinearMap::load(&required(config.g_map.clone(), "--g-map")?)?;
    let recon = if config.pipeline {
        Some(LinearMap::load(&required(config.recon_map.clone(), "--recon-map")?)?)
    } else {
        None
    };
    let needed = recon
        .as_ref()
        .map_or(g.history_len(), |r| g.history_len().max(r.history_len().saturating_sub(1)));
    let k = config.seed_frames.unwrap_or(needed);
    if k < needed {
        return Err(CliError::Usage(format!("--seed-frames {k} is shorter than the {needed} frames the maps need")));
    }
    let mut ds = read_dataset(&required(config.data.clone(), "--data")?)?;
    let norm = prepare(&mut ds, config.normalize)?;
    let truth = ds
        .test()
        .get(config.init)
        .ok_or_else(|| CliError::Usage(format!("held-out split has {} trajectories", ds.test().len())))?
        .clone();
    if config.start + k > truth.len() {
        return Err(CliError::Usage(format!("seed window exceeds the {} frames available", truth.len())));
    }
    let patch = dataset_patch(&ds, None);
    let tokens = token_sequences(std::slice::from_ref(&truth), patch)?.remove(0);
    let seed = TokenHistory::new(tokens[config.start..config.start + k].to_vec())?;
    let result = match &recon {
        Some(r) => full_pipeline_rollout(&g, r, &seed, config.steps)?,
        None => autoregressive_rollout(&g, &seed, config.steps)?,
    };

    std::fs::create_dir_all(&out).map_err(|e| tokenobs::Error::Io {
        path: out.clone(),
        source: e,
    })?;
    let m = g.meta.frame_dim;
    let token_layout = match truth.layout {
        StateLayout::Line { .. } => StateLayout::Line { n: m },
        _ => StateLayout::Scalar {
            n: (m as f64).sqrt().round() as usize,
        },
    };
    write_dataset(&out.join("tokens"), &mut one_traj(result.tokens.clone(), token_layout, truth.dt, norm)?)?;

    // Residues against the held-out truth over the generated frames that exist.
    let first = config.start + k;
    let avail = truth.len().saturating_sub(first).min(config.steps);
    let mut cols: Vec<(String, Vec<f64>)> = Vec::new();
    let gen_tokens = &result.generated_tokens()[..avail];
    for norm in [ResidueNorm::L1, ResidueNorm::L2, ResidueNorm::Linf] {
        cols.push((
            format!("token_{}", norm.name()),
            frame_residues(gen_tokens, &tokens[first..first + avail], norm)?,
        ));
    }
    if let Some(fields) = &result.fields {
        let field_layout = StateLayout::Scalar { n: truth.layout.side() };
        let amp_layout = match truth.layout {
            StateLayout::Line { n } => StateLayout::Line { n },
            _ => field_layout,
        };
        write_dataset(&out.join("fields"), &mut one_traj(fields.clone(), amp_layout, truth.dt, norm)?)?;
        let true_fields: Vec<Vec<f64>> = (first..first + avail).map(|t| truth.amplitude(t).to_vec()).collect();
        for norm in [ResidueNorm::L1, ResidueNorm::L2, ResidueNorm::Linf] {
            cols.push((format!("field_{}", norm.name()), frame_residues(&fields[..avail], &true_fields, norm)?));
        }
    }
    let view: Vec<(&str, &[f64])> = cols.iter().map(|(n, c)| (n.as_str(), c.as_slice())).collect();
    let provenance = vec![
        ("units".to_string(), "normalized values; l2 is the per-frame mean squared error".to_string()),
        ("frame_0".to_string(), format!("first generated frame = truth frame {first}")),
        ("init".to_string(), config.init.to_string()),
    ];
    write_frame_series_csv(&out.join("residues.csv"), &provenance, &view)?;
    write_run_manifest(&out.join("run.toml"), "rollout", &config, None)
}
