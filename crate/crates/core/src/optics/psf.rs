use ndarray::Array2;
use rayon::prelude::*;

use super::{blur_diameter_px, ApertureMask, LensConfig};
use crate::error::{Error, Result};

/// Normalized point spread function for one depth.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    kernel: Array2<f64>,
    depth_m: f64,
}

impl Psf {
    /// Discrete identity kernel.
    pub fn delta(depth_m: f64) -> Self {
        Self {
            kernel: Array2::ones((1, 1)),
            depth_m,
        }
    }

    /// Wraps an arbitrary kernel, normalizing it to unit sum.
    pub fn from_kernel(kernel: Array2<f64>, depth_m: f64) -> Result<Self> {
        let (h, w) = kernel.dim();
        if h != w || h % 2 == 0 {
            return Err(Error::invalid(
                "psf",
                format!("kernel must be square with odd side, got {h}x{w}"),
            ));
        }
        if kernel.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid(
                "psf",
                "kernel weights must be finite and >= 0",
            ));
        }
        let sum = kernel.sum();
        if !(sum > 0.0) {
            return Err(Error::invalid("psf", "kernel has zero mass"));
        }
        Ok(Self {
            kernel: kernel / sum,
            depth_m,
        })
    }

    pub fn kernel(&self) -> &Array2<f64> {
        &self.kernel
    }

    pub fn depth_m(&self) -> f64 {
        self.depth_m
    }

    /// Side length of the (square, odd) kernel.
    pub fn support_px(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn radius_px(&self) -> usize {
        self.support_px() / 2
    }
}

/// Smallest odd integer that is >= `d`.
pub(crate) fn odd_support(d: f64) -> usize {
    let n = d.ceil().max(1.0) as usize;
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

/// 1-D area overlaps between `n` unit pixels and `m` equal cells spanning a
/// centered interval of length `d`.
fn overlap_matrix(n: usize, m: usize, d: f64) -> Array2<f64> {
    let origin = (n as f64 - d) / 2.0;
    let cell = d / m as f64;
    Array2::from_shape_fn((n, m), |(px, c)| {
        let a = origin + c as f64 * cell;
        let b = a + cell;
        let lo = a.max(px as f64);
        let hi = b.min(px as f64 + 1.0);
        (hi - lo).max(0.0)
    })
}

/// Depth-dependent PSF: the aperture mask scaled so its circumscribing circle
/// spans the blur circle at depth `z`.
///
/// Rescaling is area-weighted: each kernel pixel integrates the mask
/// transmission over its footprint. Blur below one pixel yields the delta
/// kernel.
pub fn synthesize_psf(lens: &LensConfig, aperture: &ApertureMask, z: f64) -> Result<Psf> {
    let d = blur_diameter_px(lens, z)?;
    if d < 1.0 {
        return Ok(Psf::delta(z));
    }
    let n = odd_support(d);
    let a = overlap_matrix(n, aperture.size(), d);
    let kernel = a.dot(aperture.grid()).dot(&a.t());
    Psf::from_kernel(kernel, z)
}

/// PSFs precomputed over a depth range for one lens and aperture.
#[derive(Debug, Clone)]
pub struct PsfBank {
    lens: LensConfig,
    aperture: ApertureMask,
    depths_m: Vec<f64>,
    psfs: Vec<Psf>,
}

impl PsfBank {
    pub fn from_parts(
        lens: LensConfig,
        aperture: ApertureMask,
        depths_m: Vec<f64>,
        psfs: Vec<Psf>,
    ) -> Result<Self> {
        lens.validate()?;
        if depths_m.is_empty() || depths_m.len() != psfs.len() {
            return Err(Error::invalid(
                "psf bank",
                format!("{} depths but {} psfs", depths_m.len(), psfs.len()),
            ));
        }
        if depths_m.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                "psf bank",
                "depths must be strictly increasing",
            ));
        }
        if depths_m[0] <= lens.focus_distance_m {
            return Err(Error::invalid(
                "psf bank",
                format!(
                    "all depths must lie beyond the focus distance {} m (obstacles are assumed at Z > Z_f)",
                    lens.focus_distance_m
                ),
            ));
        }
        if let Some(i) = (0..psfs.len()).find(|&i| psfs[i].depth_m() != depths_m[i]) {
            return Err(Error::invalid(
                "psf bank",
                format!(
                    "psf {i} was generated for {} m, expected {} m",
                    psfs[i].depth_m(),
                    depths_m[i]
                ),
            ));
        }
        Ok(Self {
            lens,
            aperture,
            depths_m,
            psfs,
        })
    }

    pub fn lens(&self) -> &LensConfig {
        &self.lens
    }

    pub fn aperture(&self) -> &ApertureMask {
        &self.aperture
    }

    pub fn depths_m(&self) -> &[f64] {
        &self.depths_m
    }

    pub fn psfs(&self) -> &[Psf] {
        &self.psfs
    }

    pub fn len(&self) -> usize {
        self.depths_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths_m.is_empty()
    }

    pub fn z_min(&self) -> f64 {
        self.depths_m[0]
    }

    pub fn z_max(&self) -> f64 {
        self.depths_m[self.depths_m.len() - 1]
    }

    pub fn contains_depth(&self, z: f64) -> bool {
        z >= self.z_min() && z <= self.z_max()
    }

    /// Index of the bank depth nearest to `z` in inverse depth.
    pub fn nearest_index(&self, z: f64) -> usize {
        let inv = 1.0 / z;
        let idx = self.depths_m.partition_point(|&d| d < z);
        if idx == 0 {
            return 0;
        }
        if idx == self.depths_m.len() {
            return idx - 1;
        }
        let below = (1.0 / self.depths_m[idx - 1] - inv).abs();
        let above = (1.0 / self.depths_m[idx] - inv).abs();
        if above < below {
            idx
        } else {
            idx - 1
        }
    }

    pub fn max_support_px(&self) -> usize {
        self.psfs.iter().map(Psf::support_px).max().unwrap_or(1)
    }

    /// Gap to the neighbouring bank depths around `z` (the larger of the two).
    pub fn local_step_m(&self, z: f64) -> f64 {
        let d = &self.depths_m;
        if d.len() < 2 {
            return 0.0;
        }
        let i = self.nearest_index(z);
        let lower = if i > 0 { d[i] - d[i - 1] } else { 0.0 };
        let upper = if i + 1 < d.len() {
            d[i + 1] - d[i]
        } else {
            0.0
        };
        lower.max(upper)
    }
}

/// Depths spaced uniformly in inverse depth over `[z_min, z_max]`, ascending.
pub fn inverse_depth_grid(z_min: f64, z_max: f64, n: usize) -> Vec<f64> {
    let (near, far) = (1.0 / z_min, 1.0 / z_max);
    let step = (near - far) / (n - 1) as f64;
    (0..n)
        .map(|i| match i {
            0 => z_min,
            _ if i == n - 1 => z_max,
            _ => 1.0 / (near - i as f64 * step),
        })
        .collect()
}

/// Synthesizes PSFs on an inverse-depth grid between `z_min` and `z_max`.
pub fn build_psf_bank(
    lens: &LensConfig,
    aperture: &ApertureMask,
    z_min: f64,
    z_max: f64,
    n_depths: usize,
) -> Result<PsfBank> {
    lens.validate()?;
    if !(z_min > lens.focus_distance_m) {
        return Err(Error::Domain(format!(
            "z_min ({z_min}) must exceed the focus distance ({})",
            lens.focus_distance_m
        )));
    }
    if !(z_max > z_min) || !z_max.is_finite() {
        return Err(Error::Domain(format!(
            "z_max ({z_max}) must exceed z_min ({z_min})"
        )));
    }
    if n_depths < 2 {
        return Err(Error::Domain(format!(
            "n_depths must be >= 2, got {n_depths}"
        )));
    }
    let depths = inverse_depth_grid(z_min, z_max, n_depths);
    let psfs = depths
        .par_iter()
        .map(|&z| synthesize_psf(lens, aperture, z))
        .collect::<Result<Vec<_>>>()?;
    PsfBank::from_parts(*lens, aperture.clone(), depths, psfs)
}

/// PSFs at exactly the given depths (sorted and deduplicated), e.g. the
/// layer depths of one scene.
pub fn build_psf_bank_at(
    lens: &LensConfig,
    aperture: &ApertureMask,
    depths_m: &[f64],
) -> Result<PsfBank> {
    lens.validate()?;
    let mut depths = depths_m.to_vec();
    depths.sort_by(f64::total_cmp);
    depths.dedup();
    let psfs = depths
        .par_iter()
        .map(|&z| synthesize_psf(lens, aperture, z))
        .collect::<Result<Vec<_>>>()?;
    PsfBank::from_parts(*lens, aperture.clone(), depths, psfs)
}
