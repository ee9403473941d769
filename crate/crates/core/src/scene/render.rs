use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DotPattern, Scene};
use crate::error::Result;
use crate::optics::LensConfig;

/// Supersampling factor per axis for dot edges.
const SUPERSAMPLE: usize = 4;
/// Image positions are snapped to this fraction of a pixel, so a pattern
/// shifted by whole pixels renders to exactly shifted values.
const POSITION_QUANTUM: f64 = 1024.0;

/// A dot that landed on the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderedDot {
    /// Image position in pixels (pixel `i` spans `[i, i + 1)`).
    pub x: f64,
    pub y: f64,
    pub depth_m: f64,
    pub intensity: f64,
}

/// All-in-focus intensity and ground-truth depth.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentImage {
    pub intensity: Array2<f64>,
    pub depth_map: Array2<f64>,
    pub ambient: f64,
    pub dots: Vec<RenderedDot>,
}

impl LatentImage {
    pub fn width(&self) -> usize {
        self.intensity.ncols()
    }

    pub fn height(&self) -> usize {
        self.intensity.nrows()
    }
}

/// Per-pixel depth of the front-most surface.
pub fn depth_map(scene: &Scene, width: usize, height: usize) -> Array2<f64> {
    let mut depth = Array2::from_elem((height, width), scene.background_depth_m);
    // back to front so nearer layers overwrite
    for layer in scene.sorted_layers().iter().rev() {
        let r = layer.region;
        for y in r.y0..r.y1.min(height) {
            for x in r.x0..r.x1.min(width) {
                depth[[y, x]] = layer.depth_m;
            }
        }
    }
    depth
}

/// Renders the latent image seen by a camera with a co-located projector.
///
/// With zero baseline a dot's image position is independent of depth; the dot
/// lands on whichever surface is front-most at that pixel. Dots are
/// anti-aliased disks; dots whose centre falls off the sensor are dropped.
pub fn render_latent(
    scene: &Scene,
    pattern: &DotPattern,
    lens: &LensConfig,
) -> Result<LatentImage> {
    lens.validate()?;
    scene.validate(lens)?;
    let (w, h) = (lens.sensor_width_px, lens.sensor_height_px);
    let depth = depth_map(scene, w, h);
    let mut intensity = Array2::from_elem((h, w), scene.ambient_level);
    let r = pattern.dot_radius_px();
    let mut dots = Vec::new();

    for dot in pattern.dots() {
        let cx = snap(dot.x * w as f64);
        let cy = snap(dot.y * h as f64);
        if !(cx >= 0.0 && cx < w as f64 && cy >= 0.0 && cy < h as f64) {
            continue;
        }
        splat_disk(&mut intensity, cx, cy, r, dot.intensity);
        dots.push(RenderedDot {
            x: cx,
            y: cy,
            depth_m: depth[[cy as usize, cx as usize]],
            intensity: dot.intensity,
        });
    }

    Ok(LatentImage {
        intensity,
        depth_map: depth,
        ambient: scene.ambient_level,
        dots,
    })
}

fn snap(v: f64) -> f64 {
    (v * POSITION_QUANTUM).round() / POSITION_QUANTUM
}

/// Adds `value * coverage` of a disk to every pixel it touches.
fn splat_disk(img: &mut Array2<f64>, cx: f64, cy: f64, radius: f64, value: f64) {
    let (h, w) = img.dim();
    let x_lo = (cx - radius - 1.0).floor().max(0.0) as usize;
    let y_lo = (cy - radius - 1.0).floor().max(0.0) as usize;
    let x_hi = ((cx + radius + 1.0).ceil() as usize).min(w);
    let y_hi = ((cy + radius + 1.0).ceil() as usize).min(h);
    let r2 = radius * radius;
    let n = SUPERSAMPLE as f64;
    for y in y_lo..y_hi {
        for x in x_lo..x_hi {
            let mut hits = 0u32;
            for sy in 0..SUPERSAMPLE {
                let py = y as f64 + (sy as f64 + 0.5) / n - cy;
                for sx in 0..SUPERSAMPLE {
                    let px = x as f64 + (sx as f64 + 0.5) / n - cx;
                    if px * px + py * py <= r2 {
                        hits += 1;
                    }
                }
            }
            if hits > 0 {
                img[[y, x]] += value * f64::from(hits) / (n * n);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Layer, Rect};

    fn lens() -> LensConfig {
        LensConfig::default()
    }

    #[test]
    fn empty_pattern_is_ambient() {
        let mut scene = Scene::wall(1.2);
        scene.ambient_level = 5e-4;
        scene.layers.push(Layer {
            depth_m: 0.9,
            region: Rect {
                x0: 0,
                y0: 0,
                x1: 10,
                y1: 10,
            },
        });
        let pattern = DotPattern::from_dots(vec![], 1.5).unwrap();
        let img = render_latent(&scene, &pattern, &lens()).unwrap();
        assert!(img.intensity.iter().all(|&v| v == 5e-4));
        assert_eq!(img.depth_map[[5, 5]], 0.9);
        assert_eq!(img.depth_map[[50, 50]], 1.2);
    }

    #[test]
    fn centered_dot_is_symmetric() {
        let img = render_latent(
            &Scene::wall(1.0),
            &DotPattern::single(0.5, 0.5, 1.0, 1.5).unwrap(),
            &lens(),
        )
        .unwrap();
        assert_eq!(img.dots.len(), 1);
        assert_eq!((img.dots[0].x, img.dots[0].y), (160.0, 120.0));
        let i = &img.intensity;
        // centre sits on the corner shared by pixels 159/160 and 119/120
        for dy in 0..4 {
            for dx in 0..4 {
                let a = i[[120 + dy, 160 + dx]];
                assert_eq!(a, i[[119 - dy, 159 - dx]]);
                assert_eq!(a, i[[120 + dy, 159 - dx]]);
                assert_eq!(a, i[[119 - dy, 160 + dx]]);
            }
        }
        let (mut mx, mut my, mut m) = (0.0, 0.0, 0.0);
        for ((y, x), &v) in i.indexed_iter() {
            mx += v * (x as f64 + 0.5);
            my += v * (y as f64 + 0.5);
            m += v;
        }
        assert!((mx / m - 160.0).abs() < 1e-9 && (my / m - 120.0).abs() < 1e-9);
    }

    #[test]
    fn off_sensor_dots_are_dropped() {
        let p = DotPattern::from_dots(
            vec![
                crate::scene::Dot {
                    x: 1.0,
                    y: 0.5,
                    intensity: 1.0,
                },
                crate::scene::Dot {
                    x: 0.2,
                    y: 0.5,
                    intensity: 1.0,
                },
            ],
            1.5,
        )
        .unwrap();
        let img = render_latent(&Scene::wall(1.0), &p, &lens()).unwrap();
        assert_eq!(img.dots.len(), 1);
    }

    #[test]
    fn front_most_layer_wins() {
        let scene = Scene {
            layers: vec![
                Layer {
                    depth_m: 1.5,
                    region: Rect {
                        x0: 0,
                        y0: 0,
                        x1: 50,
                        y1: 50,
                    },
                },
                Layer {
                    depth_m: 0.8,
                    region: Rect {
                        x0: 25,
                        y0: 25,
                        x1: 75,
                        y1: 75,
                    },
                },
            ],
            background_depth_m: 3.0,
            ambient_level: 0.0,
        };
        let d = depth_map(&scene, 100, 100);
        assert_eq!(d[[10, 10]], 1.5);
        assert_eq!(d[[30, 30]], 0.8);
        assert_eq!(d[[60, 60]], 0.8);
        assert_eq!(d[[90, 90]], 3.0);
    }
}
