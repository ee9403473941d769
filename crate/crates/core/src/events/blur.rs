use ndarray::Array2;

use crate::error::{Error, Result};
use crate::optics::{LensConfig, PsfBank};
use crate::scene::LatentImage;

/// Observed (defocused) latent intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurredImage {
    pub intensity: Array2<f64>,
    pub lens: LensConfig,
}

/// One fronto-parallel depth layer of the latent image.
#[derive(Debug, Clone)]
struct Layer {
    depth_m: f64,
    psf: usize,
    /// Non-zero signal above ambient as `(x, y, value)`, row-major.
    sources: Vec<(usize, usize, f64)>,
    /// Pixels owned by this layer; only kept when there are several layers.
    mask: Option<Array2<bool>>,
    /// Inclusive bounding box of the sources, `(x0, y0, x1, y1)`.
    bbox: Option<(usize, usize, usize, usize)>,
}

/// Renders the defocused image of a layered latent image for arbitrary
/// lateral camera displacements.
///
/// Each depth layer is shifted by its own optical flow (bilinear, sub-pixel),
/// blurred with the bank PSF nearest in inverse depth and composited front to
/// back: a nearer layer hides deeper ones wherever its footprint, dilated by
/// its PSF radius, reaches.
#[derive(Debug, Clone)]
pub struct LayeredRenderer<'a> {
    bank: &'a PsfBank,
    width: usize,
    height: usize,
    ambient: f64,
    layers: Vec<Layer>,
}

impl<'a> LayeredRenderer<'a> {
    pub fn new(latent: &LatentImage, bank: &'a PsfBank) -> Result<Self> {
        let (h, w) = latent.intensity.dim();
        if latent.depth_map.dim() != (h, w) {
            return Err(Error::invalid(
                "latent image",
                "intensity and depth map sizes differ",
            ));
        }
        let mut depths: Vec<f64> = Vec::new();
        for ((y, x), &z) in latent.depth_map.indexed_iter() {
            if !bank.contains_depth(z) {
                return Err(Error::DepthOutOfRange {
                    x,
                    y,
                    depth_m: z,
                    z_min: bank.z_min(),
                    z_max: bank.z_max(),
                });
            }
            if !depths.contains(&z) {
                depths.push(z);
            }
        }
        depths.sort_by(f64::total_cmp);
        let multi = depths.len() > 1;

        let mut layers: Vec<Layer> = depths
            .iter()
            .map(|&z| Layer {
                depth_m: z,
                psf: bank.nearest_index(z),
                sources: Vec::new(),
                mask: multi.then(|| latent.depth_map.mapv(|d| d == z)),
                bbox: None,
            })
            .collect();

        for ((y, x), &v) in latent.intensity.indexed_iter() {
            let signal = v - latent.ambient;
            if signal == 0.0 {
                continue;
            }
            let z = latent.depth_map[[y, x]];
            let layer = layers
                .iter_mut()
                .find(|l| l.depth_m == z)
                .expect("every depth has a layer");
            layer.sources.push((x, y, signal));
            layer.bbox = Some(match layer.bbox {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }

        Ok(Self {
            bank,
            width: w,
            height: h,
            ambient: latent.ambient,
            layers,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn ambient(&self) -> f64 {
        self.ambient
    }

    fn lens(&self) -> &LensConfig {
        self.bank.lens()
    }

    /// Image-plane shift of layer `i` for a camera displacement.
    fn flow(&self, i: usize, baseline_m: (f64, f64)) -> (f64, f64) {
        let z = self.layers[i].depth_m;
        (
            self.lens().flow_px(baseline_m.0, z),
            self.lens().flow_px(baseline_m.1, z),
        )
    }

    /// Bounding box (inclusive) of every pixel that can differ from ambient
    /// for camera displacements along the segment from 0 to `max_baseline_m`.
    pub fn active_region(
        &self,
        max_baseline_m: (f64, f64),
    ) -> Option<(usize, usize, usize, usize)> {
        let mut out: Option<(isize, isize, isize, isize)> = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let Some((x0, y0, x1, y1)) = layer.bbox else {
                continue;
            };
            let (fx, fy) = self.flow(i, max_baseline_m);
            let r = self.bank.psfs()[layer.psf].radius_px() as isize + 1;
            let lo_x = x0 as isize + fx.min(0.0).floor() as isize - r;
            let hi_x = x1 as isize + fx.max(0.0).ceil() as isize + r;
            let lo_y = y0 as isize + fy.min(0.0).floor() as isize - r;
            let hi_y = y1 as isize + fy.max(0.0).ceil() as isize + r;
            out = Some(match out {
                None => (lo_x, lo_y, hi_x, hi_y),
                Some((a, b, c, d)) => (a.min(lo_x), b.min(lo_y), c.max(hi_x), d.max(hi_y)),
            });
        }
        let (x0, y0, x1, y1) = out?;
        let cx0 = x0.max(0);
        let cy0 = y0.max(0);
        let cx1 = x1.min(self.width as isize - 1);
        let cy1 = y1.min(self.height as isize - 1);
        (cx0 <= cx1 && cy0 <= cy1).then_some((
            cx0 as usize,
            cy0 as usize,
            cx1 as usize,
            cy1 as usize,
        ))
    }

    /// Defocused intensity after the camera moved laterally by `baseline_m`.
    pub fn render(&self, baseline_m: (f64, f64)) -> Array2<f64> {
        let (w, h) = (self.width, self.height);
        let mut out = Array2::<f64>::zeros((h, w));
        if self.layers.len() == 1 {
            self.scatter_layer(0, baseline_m, out.as_slice_mut().expect("standard layout"));
        } else {
            // front to back; `claimed` marks pixels already owned by a nearer layer
            let mut claimed = vec![false; w * h];
            let mut buf = vec![0.0; w * h];
            let last = self.layers.len() - 1;
            for i in 0..self.layers.len() {
                buf.iter_mut().for_each(|v| *v = 0.0);
                self.scatter_layer(i, baseline_m, &mut buf);
                let support = if i == last {
                    None
                } else {
                    Some(self.dilated_support(i, baseline_m))
                };
                let dst = out.as_slice_mut().expect("standard layout");
                for p in 0..w * h {
                    if claimed[p] {
                        continue;
                    }
                    match &support {
                        Some(s) if !s[p] => {}
                        _ => {
                            dst[p] = buf[p];
                            claimed[p] = true;
                        }
                    }
                }
            }
        }
        if self.ambient != 0.0 {
            out.mapv_inplace(|v| v + self.ambient);
        }
        out
    }

    /// Adds the shifted, blurred signal of layer `i` into `dst` (row-major).
    fn scatter_layer(&self, i: usize, baseline_m: (f64, f64), dst: &mut [f64]) {
        let layer = &self.layers[i];
        if layer.sources.is_empty() {
            return;
        }
        let (fx, fy) = self.flow(i, baseline_m);
        let (ix, ax) = split_shift(fx);
        let (iy, ay) = split_shift(fy);
        let psf = self.bank.psfs()[layer.psf].kernel();
        let kernel = shifted_kernel(psf, ax, ay);
        let n = kernel.nrows();
        let r = (psf.nrows() / 2) as isize;
        let k = kernel.as_slice().expect("standard layout");
        let (w, h) = (self.width as isize, self.height as isize);

        for &(sx, sy, v) in &layer.sources {
            let ox = sx as isize + ix - r;
            let oy = sy as isize + iy - r;
            let kx0 = (-ox).max(0) as usize;
            let ky0 = (-oy).max(0) as usize;
            let kx1 = ((w - ox).min(n as isize)).max(0) as usize;
            let ky1 = ((h - oy).min(n as isize)).max(0) as usize;
            if kx0 >= kx1 {
                continue;
            }
            for ky in ky0..ky1 {
                let row = ((oy + ky as isize) * w + ox) as usize;
                let krow = &k[ky * n..ky * n + n];
                let out = &mut dst[row + kx0..row + kx1];
                for (o, kv) in out.iter_mut().zip(&krow[kx0..kx1]) {
                    *o += v * kv;
                }
            }
        }
    }

    /// Footprint of layer `i` moved by its integer-rounded flow and dilated by
    /// the PSF radius plus one pixel of bilinear spread.
    fn dilated_support(&self, i: usize, baseline_m: (f64, f64)) -> Vec<bool> {
        let layer = &self.layers[i];
        let mask = layer
            .mask
            .as_ref()
            .expect("multi-layer renderer keeps masks");
        let (fx, fy) = self.flow(i, baseline_m);
        let (sx, sy) = (fx.round() as isize, fy.round() as isize);
        let (w, h) = (self.width, self.height);
        let mut moved = vec![false; w * h];
        for ((y, x), &m) in mask.indexed_iter() {
            if !m {
                continue;
            }
            let (tx, ty) = (x as isize + sx, y as isize + sy);
            if tx >= 0 && ty >= 0 && (tx as usize) < w && (ty as usize) < h {
                moved[ty as usize * w + tx as usize] = true;
            }
        }
        let r = self.bank.psfs()[layer.psf].radius_px() + 1;
        dilate(&moved, w, h, r)
    }
}

/// Splits a shift into its integer part and the bilinear fraction in `[0, 1)`.
fn split_shift(d: f64) -> (isize, f64) {
    let i = d.floor();
    (i as isize, d - i)
}

/// PSF convolved with the 2x2 bilinear interpolation stencil for a
/// fractional shift `(ax, ay)`.
fn shifted_kernel(psf: &Array2<f64>, ax: f64, ay: f64) -> Array2<f64> {
    let n = psf.nrows();
    if ax == 0.0 && ay == 0.0 {
        let mut k = Array2::zeros((n + 1, n + 1));
        k.slice_mut(ndarray::s![..n, ..n]).assign(psf);
        return k;
    }
    let weights = [
        (0usize, 0usize, (1.0 - ax) * (1.0 - ay)),
        (0, 1, ax * (1.0 - ay)),
        (1, 0, (1.0 - ax) * ay),
        (1, 1, ax * ay),
    ];
    let mut k = Array2::zeros((n + 1, n + 1));
    for ((y, x), &p) in psf.indexed_iter() {
        if p == 0.0 {
            continue;
        }
        for &(dy, dx, wgt) in &weights {
            k[[y + dy, x + dx]] += p * wgt;
        }
    }
    k
}

/// Square dilation of a binary mask by `r` pixels (separable, prefix sums).
fn dilate(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    let mut horiz = vec![false; w * h];
    let mut prefix = vec![0u32; w.max(h) + 1];
    for y in 0..h {
        for x in 0..w {
            prefix[x + 1] = prefix[x] + u32::from(mask[y * w + x]);
        }
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r + 1).min(w);
            horiz[y * w + x] = prefix[hi] > prefix[lo];
        }
    }
    let mut out = vec![false; w * h];
    for x in 0..w {
        for y in 0..h {
            prefix[y + 1] = prefix[y] + u32::from(horiz[y * w + x]);
        }
        for y in 0..h {
            let lo = y.saturating_sub(r);
            let hi = (y + r + 1).min(h);
            out[y * w + x] = prefix[hi] > prefix[lo];
        }
    }
    out
}

/// Defocuses the latent image: each depth layer is convolved with its bank
/// PSF and layers are composited front to back.
pub fn blur_image(latent: &LatentImage, bank: &PsfBank) -> Result<BlurredImage> {
    let renderer = LayeredRenderer::new(latent, bank)?;
    Ok(BlurredImage {
        intensity: renderer.render((0.0, 0.0)),
        lens: *bank.lens(),
    })
}
