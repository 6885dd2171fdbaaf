use std::path::Path;

use serde::{Deserialize, Serialize};
use tokenobs::dataset::{
    export_frame_image, generate_to_dir, presets, read_dataset, write_dataset, Colormap, ConductivitySpec, Dataset,
    GenerateConfig,
};
use tokenobs::grid::StateLayout;
use tokenobs::solvers::Trajectory;
use tokenobs::tokenizer::{token_count, tokenize_trajectory};

use crate::config::{load_section, resolve, write_run_manifest, Flags};
use crate::error::{CliError, CliResult};
use crate::{ExportArgs, GenerateArgs, TokenizeArgs};

/// Resolve the recipe for `generate`: preset, then config file, then flags.
pub fn generate_config(a: &GenerateArgs, cfg: Option<&Path>, seed: Option<u64>) -> CliResult<GenerateConfig> {
    let mut file = load_section(cfg, "generate")?;
    let preset_name = a
        .preset
        .clone()
        .or_else(|| file.remove("preset").and_then(|v| v.as_str().map(str::to_string)))
        .unwrap_or_else(|| "heat_lowres".into());
    let base = presets::by_name(&preset_name).ok_or_else(|| {
        CliError::Usage(format!("unknown preset {preset_name:?}; known: {}", presets::NAMES.join(", ")))
    })?;
    let mut flags = Flags::default();
    flags
        .set("equation", a.equation.clone())
        .set_usize("grid_size", a.grid)
        .set("dx", a.dx)
        .set("dt", a.dt)
        .set_usize("skip", a.skip)
        .set_usize("frames", a.frames)
        .set_usize("burn_in", a.burn_in)
        .set_usize("inits", a.inits)
        .set_usize("patch", a.patch)
        .set("train_fraction", a.train_fraction)
        .set("domain_length", a.domain_length)
        .set_u64("seed", seed);
    let mut config: GenerateConfig = resolve(&base, &file, &flags.0, "generate")?;
    if a.constant_conductivity {
        config.conductivity = config.conductivity.constant_counterpart();
    }
    if let (Some(s), ConductivitySpec::Grf { seed, .. }) = (a.conductivity_seed, &mut config.conductivity) {
        *seed = s;
    }
    config.validate()?;
    Ok(config)
}

pub fn generate(a: GenerateArgs, cfg: Option<&Path>, seed: Option<u64>) -> CliResult<()> {
    let config = generate_config(&a, cfg, seed)?;
    let started = std::time::Instant::now();
    let manifest = generate_to_dir(&a.out, &config)?;
    log::info!(
        "wrote {} trajectories of {} frames to {} in {:.1}s",
        manifest.blobs.len(),
        manifest.frames_per_init,
        a.out.display(),
        started.elapsed().as_secs_f64()
    );
    write_run_manifest(&a.out.join("run.toml"), "generate", &config, Some(config.seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizeConfig {
    pub data: String,
    pub patch: Option<usize>,
}

impl Default for TokenizeConfig {
    fn default() -> Self {
        TokenizeConfig {
            data: String::new(),
            patch: None,
        }
    }
}

/// Token trajectory: frames are patch averages laid out as a coarser field.
pub fn tokenize_traj(t: &Trajectory, patch: usize) -> tokenobs::Result<Trajectory> {
    let m = token_count(t.layout, patch)?;
    let layout = match t.layout {
        StateLayout::Line { .. } => StateLayout::Line { n: m },
        _ => StateLayout::Scalar { n: t.layout.side() / patch },
    };
    Ok(Trajectory {
        layout,
        frames: tokenize_trajectory(t, patch)?,
        ..t.clone()
    })
}

pub fn tokenize(a: TokenizeArgs, cfg: Option<&Path>) -> CliResult<()> {
    let mut flags = Flags::default();
    flags.set_path("data", Some(&a.data)).set_usize("patch", a.patch);
    let config: TokenizeConfig = resolve(&TokenizeConfig::default(), &load_section(cfg, "tokenize")?, &flags.0, "tokenize")?;
    let ds = read_dataset(Path::new(&config.data))?;
    let patch = config
        .patch
        .or_else(|| ds.manifest.recipe.as_ref().map(|r| r.patch))
        .ok_or_else(|| CliError::Usage("--patch is required for datasets without a recipe".into()))?;
    let trajs = ds
        .trajectories
        .iter()
        .map(|t| tokenize_traj(t, patch))
        .collect::<tokenobs::Result<Vec<_>>>()?;
    let mut out = Dataset::new(trajs, ds.manifest.recipe.clone(), ds.manifest.train_count)?;
    out.manifest.normalization = ds.manifest.normalization;
    out.manifest.token_patch = Some(patch);
    write_dataset(&a.out, &mut out)?;
    write_run_manifest(&a.out.join("run.toml"), "tokenize", &config, None)
}

pub fn export(a: ExportArgs) -> CliResult<()> {
    let ds = read_dataset(&a.data)?;
    let t = ds
        .trajectories
        .get(a.init)
        .ok_or_else(|| CliError::Usage(format!("dataset has {} trajectories", ds.trajectories.len())))?;
    if a.frame >= t.len() {
        return Err(CliError::Usage(format!("trajectory has {} frames", t.len())));
    }
    if matches!(t.layout, StateLayout::Line { .. }) {
        return Err(CliError::Usage("image export needs a 2D dataset".into()));
    }
    let field = t.amplitude(a.frame);
    let range = match (&a.range, ds.manifest.normalization) {
        (Some(r), _) if r.len() == 2 => (r[0], r[1]),
        (Some(_), _) => return Err(CliError::Usage("--range takes lo,hi".into())),
        (None, Some(n)) if n.applied => (-1.0, 1.0),
        (None, Some(n)) if !n.constant => (n.min, n.max),
        _ => {
            let lo = field.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = field.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 1.0, lo + 1.0)
            }
        }
    };
    let cmap = if a.color { Colormap::BlueWhiteRed } else { Colormap::Gray };
    export_frame_image(field, t.layout.side(), range, cmap, &a.out)?;
    Ok(())
}
