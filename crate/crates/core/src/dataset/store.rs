//! Directory layout of a stored dataset:
//!
//! ```text
//! manifest.toml          DatasetManifest, TOML
//! traj_0000.f64, ...     one blob per init: f64 little-endian, frame-major,
//!                        each frame in the crate's row-major state order
//! ```

use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::generate::{generate_trajectory, GenerateConfig};
use super::normalize::Normalization;
use super::write_atomic;
use crate::error::{Error, Result};
use crate::grid::StateLayout;
use crate::solvers::{Equation, Trajectory};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobEntry {
    pub file: String,
    pub seed: Option<u64>,
    pub frames: usize,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    /// Seconds since the Unix epoch at write time.
    pub created_unix: u64,
    /// Recipe that produced the data; absent for datasets assembled by hand.
    pub recipe: Option<GenerateConfig>,
    pub equation: Equation,
    pub layout: StateLayout,
    /// Time between stored frames.
    pub frame_dt: f64,
    pub skip: usize,
    pub burn_in: usize,
    pub frames_per_init: usize,
    /// Leading trajectories forming the training split.
    pub train_count: usize,
    pub normalization: Option<Normalization>,
    /// Set when the frames are patch-average tokens of another dataset.
    #[serde(default)]
    pub token_patch: Option<usize>,
    pub blobs: Vec<BlobEntry>,
}

impl DatasetManifest {
    /// Manifest describing `trajectories` (blob list filled in by the writer).
    pub fn describe(trajectories: &[Trajectory], recipe: Option<GenerateConfig>, train_count: usize) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::param("a dataset needs at least one trajectory"))?;
        for (i, t) in trajectories.iter().enumerate() {
            t.validate()?;
            if t.layout != first.layout || t.len() != first.len() || t.dt != first.dt || t.equation != first.equation {
                return Err(Error::dim(format!(
                    "trajectory {i} does not share layout, length, dt and equation with trajectory 0"
                )));
            }
        }
        Ok(DatasetManifest {
            format_version: FORMAT_VERSION,
            created_unix: 0,
            recipe,
            equation: first.equation,
            layout: first.layout,
            frame_dt: first.dt,
            skip: first.skip,
            burn_in: first.burn_in,
            frames_per_init: first.len(),
            train_count: train_count.min(trajectories.len()),
            normalization: None,
            token_patch: None,
            blobs: Vec::new(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Numerical(format!("manifest serialization failed: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let probe: toml::Table = toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        match probe.get("format_version").and_then(|v| v.as_integer()) {
            Some(v) if v == FORMAT_VERSION as i64 => {}
            Some(v) => {
                return Err(Error::format(
                    path,
                    format!("format version {v} is not supported (this reader handles {FORMAT_VERSION})"),
                ))
            }
            None => return Err(Error::format(path, "missing format_version")),
        }
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    fn frame_len(&self) -> usize {
        self.layout.len()
    }
}

/// A manifest and the trajectories it describes.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn new(trajectories: Vec<Trajectory>, recipe: Option<GenerateConfig>, train_count: usize) -> Result<Self> {
        let manifest = DatasetManifest::describe(&trajectories, recipe, train_count)?;
        Ok(Dataset { manifest, trajectories })
    }

    pub fn train(&self) -> &[Trajectory] {
        &self.trajectories[..self.manifest.train_count]
    }

    pub fn test(&self) -> &[Trajectory] {
        &self.trajectories[self.manifest.train_count..]
    }
}

fn blob_name(i: usize) -> String {
    format!("traj_{i:04}.f64")
}

fn write_blob(path: &Path, traj: &Trajectory) -> Result<u64> {
    write_atomic(path, |w| {
        for frame in &traj.frames {
            for v in frame {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    })?;
    Ok((traj.len() * traj.layout.len() * 8) as u64)
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_manifest(dir: &Path, manifest: &DatasetManifest) -> Result<()> {
    let text = manifest.to_toml()?;
    write_atomic(&dir.join(MANIFEST_FILE), |w| w.write_all(text.as_bytes()))
}

/// Write every trajectory as a blob, then the manifest. Each file is written atomically.
pub fn write_dataset(dir: &Path, dataset: &mut Dataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let fresh = DatasetManifest::describe(&dataset.trajectories, None, 0)?;
    let m = &mut dataset.manifest;
    if (fresh.layout, fresh.frames_per_init, fresh.equation) != (m.layout, m.frames_per_init, m.equation) {
        return Err(Error::dim("manifest does not describe the trajectories being written"));
    }
    m.blobs.clear();
    for (i, t) in dataset.trajectories.iter().enumerate() {
        let name = blob_name(i);
        let bytes = write_blob(&dir.join(&name), t)?;
        m.blobs.push(BlobEntry {
            file: name,
            seed: t.seed,
            frames: t.len(),
            bytes,
        });
    }
    m.created_unix = now_unix();
    write_manifest(dir, m)
}

/// Run a recipe straight to disk, one trajectory in memory per worker.
///
/// Blobs hold raw values; the train-split normalization constants are
/// recorded in the manifest with `applied = false`.
pub fn generate_to_dir(dir: &Path, cfg: &GenerateConfig) -> Result<DatasetManifest> {
    use rayon::prelude::*;
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let train = cfg.train_count();
    let results: Vec<(BlobEntry, Trajectory, Option<(f64, f64)>)> = (0..cfg.inits)
        .into_par_iter()
        .map(|i| {
            let mut t = generate_trajectory(cfg, i)?;
            let name = blob_name(i);
            let bytes = write_blob(&dir.join(&name), &t)?;
            let range = (i < train).then(|| Normalization::range_of(std::slice::from_ref(&t)));
            let entry = BlobEntry {
                file: name,
                seed: t.seed,
                frames: t.len(),
                bytes,
            };
            t.frames.truncate(1);
            Ok((entry, t, range))
        })
        .collect::<Result<_>>()?;
    let first = &results[0].1;
    let mut manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        created_unix: now_unix(),
        recipe: Some(cfg.clone()),
        equation: first.equation,
        layout: first.layout,
        frame_dt: first.dt,
        skip: first.skip,
        burn_in: first.burn_in,
        frames_per_init: results[0].0.frames,
        train_count: train,
        normalization: None,
        token_patch: None,
        blobs: Vec::with_capacity(results.len()),
    };
    let mut range: Option<(f64, f64)> = None;
    for (blob, _, r) in results {
        if let Some((lo, hi)) = r {
            range = Some(range.map_or((lo, hi), |(a, b)| (a.min(lo), b.max(hi))));
        }
        manifest.blobs.push(blob);
    }
    manifest.normalization = range.map(|(lo, hi)| Normalization::from_range(lo, hi, false));
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

fn read_blob(path: &Path, entry: &BlobEntry, manifest: &DatasetManifest) -> Result<Vec<Vec<f64>>> {
    let len = manifest.frame_len();
    let want = (entry.frames * len * 8) as u64;
    if entry.bytes != want {
        return Err(Error::format(
            path,
            format!(
                "manifest lists {} bytes but {} frames of {len} values need {want}",
                entry.bytes, entry.frames
            ),
        ));
    }
    let found = std::fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
    if found != want {
        return Err(Error::format(
            path,
            format!("blob holds {found} bytes, expected {want} ({} frames x {len} values x 8)", entry.frames),
        ));
    }
    let mut raw = Vec::with_capacity(want as usize);
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::io(path, e))?;
    Ok(raw
        .chunks_exact(len * 8)
        .map(|frame| {
            frame
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect()
        })
        .collect())
}

/// Read a dataset, checking the version and every blob's size.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = DatasetManifest::load(&dir.join(MANIFEST_FILE))?;
    if manifest.blobs.is_empty() {
        return Err(Error::format(dir.join(MANIFEST_FILE), "manifest lists no blobs"));
    }
    let mut trajectories = Vec::with_capacity(manifest.blobs.len());
    for entry in &manifest.blobs {
        let path: PathBuf = dir.join(&entry.file);
        if entry.frames != manifest.frames_per_init {
            return Err(Error::format(
                &path,
                format!(
                    "blob lists {} frames, manifest says {} per init",
                    entry.frames, manifest.frames_per_init
                ),
            ));
        }
        trajectories.push(Trajectory {
            layout: manifest.layout,
            frames: read_blob(&path, entry, &manifest)?,
            dt: manifest.frame_dt,
            skip: manifest.skip,
            burn_in: manifest.burn_in,
            equation: manifest.equation,
            seed: entry.seed,
        });
    }
    Ok(Dataset { manifest, trajectories })
}
