//! Metric depth maps as 16-bit grayscale PNG plus a sidecar text file
//! `scale_m_per_unit=<v>`. Unit value 0 means "no data".

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, ImageFormat, Luma};
use ndarray::Array2;

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::io;

/// Default resolution: 0.1 mm per unit, covering up to 6.5535 m.
pub const DEFAULT_SCALE_M_PER_UNIT: f64 = 1e-4;

/// Finest of the default scale and one that fits the largest depth.
pub fn choose_scale(depth: &Array2<f64>) -> f64 {
    let max = depth
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |a, &b| a.max(b));
    if max / DEFAULT_SCALE_M_PER_UNIT <= f64::from(u16::MAX) {
        DEFAULT_SCALE_M_PER_UNIT
    } else {
        max / f64::from(u16::MAX - 1)
    }
}

/// Quantizes depths; non-finite or non-positive values become 0 (no data).
pub fn encode(depth: &Array2<f64>, scale_m_per_unit: f64) -> Vec<u8> {
    let (h, w) = depth.dim();
    let data: Vec<u16> = depth
        .iter()
        .map(|&d| {
            if d.is_finite() && d > 0.0 {
                (d / scale_m_per_unit)
                    .round()
                    .clamp(1.0, f64::from(u16::MAX)) as u16
            } else {
                0
            }
        })
        .collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(w as u32, h as u32, data).expect("buffer matches dimensions");
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("in-memory PNG encoding cannot fail");
    out.into_inner()
}

/// Decodes to meters; "no data" pixels become NaN.
pub fn decode(bytes: &[u8], scale_m_per_unit: f64) -> Result<Array2<f64>> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::invalid("depth png", e.to_string()))?
        .into_luma16();
    let (w, h) = img.dimensions();
    let data = img
        .into_raw()
        .into_iter()
        .map(|u| {
            if u == 0 {
                f64::NAN
            } else {
                f64::from(u) * scale_m_per_unit
            }
        })
        .collect();
    Array2::from_shape_vec((h as usize, w as usize), data)
        .map_err(|e| Error::invalid("depth png", e.to_string()))
}

pub fn sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("txt")
}

/// Writes `<path>` and its scale sidecar atomically.
pub fn write(path: &Path, depth: &Array2<f64>) -> Result<f64> {
    let scale = choose_scale(depth);
    io::write_atomic(path, &encode(depth, scale))?;
    io::write_atomic(
        &sidecar_path(path),
        format!("scale_m_per_unit={scale}\n").as_bytes(),
    )?;
    Ok(scale)
}

pub fn read(path: &Path) -> Result<Array2<f64>> {
    let kv = KeyValues::parse(&io::read_to_string(&sidecar_path(path))?)?;
    let scale: f64 = kv.get("scale_m_per_unit")?;
    decode(&io::read_bytes(path)?, scale)
}
