use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{blur_sensitivity, LensConfig};

/// Which parameter a curve family varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    FNumber,
    FocalLength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub sweep: Sweep,
    pub focal_length_m: f64,
    pub f_number: f64,
    /// ds/dZ in meters of blur per meter of depth, one per table depth.
    pub values: Vec<f64>,
}

impl SensitivityCurve {
    pub fn label(&self) -> String {
        match self.sweep {
            Sweep::FNumber => format!("N={}", self.f_number),
            Sweep::FocalLength => format!("f={}mm", fmt_mm(self.focal_length_m)),
        }
    }
}

fn fmt_mm(f: f64) -> String {
    let mm = f * 1e3;
    if (mm - mm.round()).abs() < 1e-9 {
        format!("{}", mm.round())
    } else {
        format!("{mm}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub focus_distance_m: f64,
    pub depths_m: Vec<f64>,
    pub curves: Vec<SensitivityCurve>,
}

/// Parameters of the two curve families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityParams {
    /// f-numbers of the first family, all at `base_focal_length_m`.
    pub f_numbers: Vec<f64>,
    pub base_focal_length_m: f64,
    /// Focal lengths of the second family, all at `base_f_number`.
    pub focal_lengths_m: Vec<f64>,
    pub base_f_number: f64,
    pub focus_distance_m: f64,
    pub z_min_m: f64,
    pub z_max_m: f64,
    pub samples: usize,
}

impl Default for SensitivityParams {
    fn default() -> Self {
        Self {
            f_numbers: vec![2.0, 4.0, 8.0, 16.0, 22.0],
            base_focal_length_m: 35e-3,
            focal_lengths_m: vec![8e-3, 16e-3, 25e-3, 35e-3, 50e-3],
            base_f_number: 16.0,
            focus_distance_m: 0.5,
            z_min_m: 0.6,
            z_max_m: 3.0,
            samples: 49,
        }
    }
}

/// ds/dZ over depth for an f-number family and a focal-length family.
pub fn sensitivity_curves(params: &SensitivityParams) -> Result<SensitivityTable> {
    let p = params;
    if !(p.z_min_m > p.focus_distance_m) || !(p.z_max_m > p.z_min_m) {
        return Err(Error::Domain(format!(
            "depth range [{}, {}] must lie beyond the focus distance {}",
            p.z_min_m, p.z_max_m, p.focus_distance_m
        )));
    }
    if p.samples < 2 {
        return Err(Error::Domain("need at least two depth samples".into()));
    }
    let depths_m: Vec<f64> = (0..p.samples)
        .map(|i| p.z_min_m + (p.z_max_m - p.z_min_m) * i as f64 / (p.samples - 1) as f64)
        .collect();
    let curve = |sweep, f: f64, n: f64| -> Result<SensitivityCurve> {
        let lens = LensConfig {
            focal_length_m: f,
            f_number: n,
            focus_distance_m: p.focus_distance_m,
            ..LensConfig::default()
        };
        lens.validate()?;
        let values = depths_m
            .iter()
            .map(|&z| blur_sensitivity(&lens, z))
            .collect::<Result<Vec<_>>>()?;
        Ok(SensitivityCurve {
            sweep,
            focal_length_m: f,
            f_number: n,
            values,
        })
    };
    let mut curves = Vec::new();
    for &n in &p.f_numbers {
        curves.push(curve(Sweep::FNumber, p.base_focal_length_m, n)?);
    }
    for &f in &p.focal_lengths_m {
        curves.push(curve(Sweep::FocalLength, f, p.base_f_number)?);
    }
    Ok(SensitivityTable {
        focus_distance_m: p.focus_distance_m,
        depths_m,
        curves,
    })
}

impl SensitivityTable {
    /// Header `z_m,<label>...`, one row per depth, 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z_m");
        for c in &self.curves {
            out.push(',');
            out.push_str(&c.label());
        }
        out.push('\n');
        for (i, z) in self.depths_m.iter().enumerate() {
            out.push_str(&format!("{z:.6}"));
            for c in &self.curves {
                out.push_str(&format!(",{:.9e}", c.values[i]));
            }
            out.push('\n');
        }
        out
    }
}
