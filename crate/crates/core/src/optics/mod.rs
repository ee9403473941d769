//! Thin-lens defocus geometry, aperture masks and depth-dependent PSFs.

mod aperture;
mod psf;
mod spectral;

pub use aperture::{ApertureMask, BUILTIN_APERTURES};
pub use psf::{
    build_psf_bank, build_psf_bank_at, inverse_depth_grid, synthesize_psf, Psf, PsfBank,
};
pub use spectral::{magnitude_spectrum, spectral_discriminability};

use serde::{Deserialize, Serialize};

use crate::config::KeyValues;
use crate::error::{Error, Result};

/// Thin-lens camera description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensConfig {
    pub focal_length_m: f64,
    pub f_number: f64,
    pub focus_distance_m: f64,
    pub pixel_pitch_m: f64,
    pub sensor_width_px: usize,
    pub sensor_height_px: usize,
}

impl Default for LensConfig {
    /// 16 mm f/1.4 lens focused at 0.5 m on a 320x240 sensor with 20 um
    /// (binned) pixels.
    fn default() -> Self {
        Self {
            focal_length_m: 0.016,
            f_number: 1.4,
            focus_distance_m: 0.5,
            pixel_pitch_m: 20e-6,
            sensor_width_px: 320,
            sensor_height_px: 240,
        }
    }
}

impl LensConfig {
    pub fn new(
        focal_length_m: f64,
        f_number: f64,
        focus_distance_m: f64,
        pixel_pitch_m: f64,
        sensor_width_px: usize,
        sensor_height_px: usize,
    ) -> Result<Self> {
        let lens = Self {
            focal_length_m,
            f_number,
            focus_distance_m,
            pixel_pitch_m,
            sensor_width_px,
            sensor_height_px,
        };
        lens.validate()?;
        Ok(lens)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.focal_length_m,
            self.f_number,
            self.focus_distance_m,
            self.pixel_pitch_m,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("lens", "non-finite parameter"));
        }
        if self.focal_length_m <= 0.0 {
            return Err(Error::invalid("lens", "focal_length_m must be > 0"));
        }
        if self.f_number <= 0.0 {
            return Err(Error::invalid("lens", "f_number must be > 0"));
        }
        if self.focus_distance_m <= self.focal_length_m {
            return Err(Error::invalid(
                "lens",
                format!(
                    "focus_distance_m ({}) must exceed focal_length_m ({})",
                    self.focus_distance_m, self.focal_length_m
                ),
            ));
        }
        if self.pixel_pitch_m <= 0.0 {
            return Err(Error::invalid("lens", "pixel_pitch_m must be > 0"));
        }
        if self.sensor_width_px == 0 || self.sensor_height_px == 0 {
            return Err(Error::invalid("lens", "sensor dimensions must be >= 1"));
        }
        Ok(())
    }

    /// Parses the `key=value` lens format. Missing keys fall back to
    /// [`LensConfig::default`].
    pub fn from_config(text: &str) -> Result<Self> {
        Self::from_key_values(&KeyValues::parse(text)?)
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        Self::new(
            kv.get_or("focal_length_m", d.focal_length_m)?,
            kv.get_or("f_number", d.f_number)?,
            kv.get_or("focus_distance_m", d.focus_distance_m)?,
            kv.get_or("pixel_pitch_m", d.pixel_pitch_m)?,
            kv.get_or("sensor_width_px", d.sensor_width_px)?,
            kv.get_or("sensor_height_px", d.sensor_height_px)?,
        )
    }

    pub fn to_config(&self) -> String {
        format!(
            "focal_length_m={}\nf_number={}\nfocus_distance_m={}\npixel_pitch_m={}\nsensor_width_px={}\nsensor_height_px={}\n",
            self.focal_length_m,
            self.f_number,
            self.focus_distance_m,
            self.pixel_pitch_m,
            self.sensor_width_px,
            self.sensor_height_px
        )
    }

    pub fn with_focus(mut self, focus_distance_m: f64) -> Self {
        self.focus_distance_m = focus_distance_m;
        self
    }

    pub fn with_sensor(mut self, width_px: usize, height_px: usize) -> Self {
        self.sensor_width_px = width_px;
        self.sensor_height_px = height_px;
        self
    }

    /// Blur circle diameter in the limit Z -> infinity, `f^2 / (N (Z_f - f))`.
    fn blur_scale_m(&self) -> f64 {
        let f = self.focal_length_m;
        f * f / (self.f_number * (self.focus_distance_m - f))
    }

    /// Image-plane displacement in pixels of a point at depth `z` after the
    /// camera translated laterally by `baseline_m`.
    pub fn flow_px(&self, baseline_m: f64, z: f64) -> f64 {
        self.focal_length_m * baseline_m / (z * self.pixel_pitch_m)
    }
}

/// Defocus blur circle diameter (meters, on the sensor) for a point at depth `z`.
///
/// `s = f^2/N * |Z - Z_f| / (Z (Z_f - f))`, zero exactly at `z == Z_f`.
pub fn blur_circle_size(lens: &LensConfig, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("depth must be > 0, got {z}")));
    }
    let zf = lens.focus_distance_m;
    if z == zf {
        return Ok(0.0);
    }
    Ok(lens.blur_scale_m() * (z - zf).abs() / z)
}

/// Rate of change of blur circle diameter with depth, `ds/dZ`, for `z > Z_f`.
pub fn blur_sensitivity(lens: &LensConfig, z: f64) -> Result<f64> {
    let zf = lens.focus_distance_m;
    if !(z > zf) || !z.is_finite() {
        return Err(Error::Domain(format!(
            "blur sensitivity is defined for z > Z_f ({zf}), got {z}"
        )));
    }
    Ok(lens.blur_scale_m() * zf / (z * z))
}

/// Far-focus approximation `f^2 / (N Z^2)`, valid when `Z_f >> f`.
pub fn blur_sensitivity_far_focus(lens: &LensConfig, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("depth must be > 0, got {z}")));
    }
    let f = lens.focal_length_m;
    Ok(f * f / (lens.f_number * z * z))
}

/// Blur circle diameter in pixels.
pub fn blur_diameter_px(lens: &LensConfig, z: f64) -> Result<f64> {
    Ok(blur_circle_size(lens, z)? / lens.pixel_pitch_m)
}
