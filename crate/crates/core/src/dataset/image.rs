//! Frame snapshots as portable graymaps and pixmaps.
//!
//! Values are mapped linearly from `[lo, hi]` to `0..=255` via
//! `255 (v - lo) / (hi - lo)`, rounded half away from zero and clamped;
//! under `[-1, 1]` a zero field therefore exports as 128.
//!
//! The pixmap colormap is a fixed blue-white-red ramp: with `s` the gray
//! level, `s <= 127` gives `(2s, 2s, 255)` and `s >= 128` gives
//! `(255, 2(255 - s), 2(255 - s))`.

use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Colormap {
    /// 8-bit `P5` graymap.
    Gray,
    /// 8-bit `P6` pixmap with the blue-white-red ramp.
    BlueWhiteRed,
}

pub fn gray_level(v: f64, lo: f64, hi: f64) -> u8 {
    (255.0 * (v - lo) / (hi - lo)).round().clamp(0.0, 255.0) as u8
}

pub fn blue_white_red(s: u8) -> [u8; 3] {
    if s <= 127 {
        [2 * s, 2 * s, 255]
    } else {
        let t = 2 * (255 - s);
        [255, t, t]
    }
}

/// Write an `n x n` row-major field (row `i` of the image is lattice row `i`).
pub fn export_frame_image(field: &[f64], n: usize, range: (f64, f64), colormap: Colormap, path: &Path) -> Result<()> {
    if field.len() != n * n || n == 0 {
        return Err(Error::dim(format!("field of {} values is not {n}x{n}", field.len())));
    }
    let (lo, hi) = range;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::param(format!("image range [{lo}, {hi}] is empty")));
    }
    if field.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("cannot export a field with non-finite values"));
    }
    let levels: Vec<u8> = field.iter().map(|&v| gray_level(v, lo, hi)).collect();
    write_atomic(path, |w| match colormap {
        Colormap::Gray => {
            write!(w, "P5\n{n} {n}\n255\n")?;
            w.write_all(&levels)
        }
        Colormap::BlueWhiteRed => {
            write!(w, "P6\n{n} {n}\n255\n")?;
            let rgb: Vec<u8> = levels.iter().flat_map(|&s| blue_white_red(s)).collect();
            w.write_all(&rgb)
        }
    })
}
