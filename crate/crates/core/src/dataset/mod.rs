//! On-disk datasets, normalization, image export and generation recipes.

mod generate;
mod image;
mod normalize;
pub mod presets;
mod store;

pub use generate::{generate_trajectories, generate_trajectory, ConductivitySpec, EquationKind, GenerateConfig, InitialCondition};
pub use image::{blue_white_red, export_frame_image, gray_level, Colormap};
pub use normalize::{normalize_dataset, Normalization};
pub use store::{generate_to_dir, read_dataset, write_dataset, BlobEntry, Dataset, DatasetManifest, FORMAT_VERSION, MANIFEST_FILE};

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Write `path` through a sibling temporary file and rename it into place.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::param(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let file = std::fs::File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}
