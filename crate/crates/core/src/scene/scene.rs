use serde::{Deserialize, Serialize};

use crate::config::strip_comment;
use crate::error::{Error, Result};
use crate::optics::LensConfig;

/// Axis-aligned pixel rectangle covering `x0 <= x < x1`, `y0 <= y < y1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Fronto-parallel planar obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub depth_m: f64,
    pub region: Rect,
}

/// Layered scene in the dark: planar obstacles in front of a background wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub layers: Vec<Layer>,
    pub background_depth_m: f64,
    pub ambient_level: f64,
}

pub const MAX_AMBIENT: f64 = 1e-3;

impl Scene {
    /// A single wall filling the field of view.
    pub fn wall(depth_m: f64) -> Self {
        Self {
            layers: Vec::new(),
            background_depth_m: depth_m,
            ambient_level: 0.0,
        }
    }

    /// Layers sorted front (nearest) to back.
    pub fn sorted_layers(&self) -> Vec<Layer> {
        let mut layers = self.layers.clone();
        layers.sort_by(|a, b| a.depth_m.total_cmp(&b.depth_m));
        layers
    }

    /// Checks the scene against the sensor and focus distance of `lens`.
    pub fn validate(&self, lens: &LensConfig) -> Result<()> {
        self.validate_intrinsic()?;
        let zf = lens.focus_distance_m;
        if self.background_depth_m <= zf {
            return Err(Error::invalid(
                "scene",
                format!(
                    "background at {} m is not beyond the focus distance {zf} m; obstacles must lie at Z > Z_f",
                    self.background_depth_m
                ),
            ));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            check_layer(i + 1, layer, lens)?;
        }
        Ok(())
    }

    fn validate_intrinsic(&self) -> Result<()> {
        if !(0.0..=MAX_AMBIENT).contains(&self.ambient_level) {
            return Err(Error::invalid(
                "scene",
                format!(
                    "ambient level {} outside [0, {MAX_AMBIENT}]",
                    self.ambient_level
                ),
            ));
        }
        if !(self.background_depth_m > 0.0) || !self.background_depth_m.is_finite() {
            return Err(Error::invalid("scene", "background depth must be > 0"));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.depth_m >= self.background_depth_m {
                return Err(Error::invalid(
                    "scene",
                    format!(
                        "layer {} at {} m is not in front of the background at {} m",
                        i + 1,
                        layer.depth_m,
                        self.background_depth_m
                    ),
                ));
            }
            let r = layer.region;
            if r.x0 >= r.x1 || r.y0 >= r.y1 {
                return Err(Error::invalid(
                    "scene",
                    format!("layer {} has an empty region", i + 1),
                ));
            }
        }
        Ok(())
    }

    /// Parses the scene format without a lens: `background <depth_m>`,
    /// `layer <depth_m> <x0> <y0> <x1> <y1>`, `ambient <level>`.
    pub fn parse(text: &str) -> Result<Self> {
        Ok(Self::parse_with_lines(text)?.0)
    }

    /// Parses and validates against `lens`; layers at or before the focus
    /// distance are rejected with the line they came from.
    pub fn from_config(text: &str, lens: &LensConfig) -> Result<Self> {
        let (scene, lines) = Self::parse_with_lines(text)?;
        let zf = lens.focus_distance_m;
        if scene.background_depth_m <= zf {
            return Err(Error::parse(
                lines.background,
                format!(
                    "background at {} m is not beyond the focus distance {zf} m; obstacles must lie at Z > Z_f",
                    scene.background_depth_m
                ),
            ));
        }
        for (i, layer) in scene.layers.iter().enumerate() {
            check_layer(i + 1, layer, lens)
                .map_err(|e| Error::parse(lines.layers[i], e.to_string()))?;
        }
        Ok(scene)
    }

    fn parse_with_lines(text: &str) -> Result<(Self, SourceLines)> {
        let mut background = None;
        let mut ambient = 0.0;
        let mut layers = Vec::new();
        let mut lines = SourceLines::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let tokens: Vec<&str> = strip_comment(raw).split_whitespace().collect();
            let Some((&head, args)) = tokens.split_first() else {
                continue;
            };
            let arity = |n: usize| -> Result<()> {
                if args.len() == n {
                    Ok(())
                } else {
                    Err(Error::parse(
                        line_no,
                        format!("`{head}` takes {n} arguments, got {}", args.len()),
                    ))
                }
            };
            let float = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::parse(line_no, format!("`{s}` is not a number")))
            };
            let coord = |s: &str| -> Result<usize> {
                s.parse()
                    .map_err(|_| Error::parse(line_no, format!("`{s}` is not a pixel coordinate")))
            };
            match head {
                "background" => {
                    arity(1)?;
                    if background.is_some() {
                        return Err(Error::parse(line_no, "background given twice"));
                    }
                    background = Some(float(args[0])?);
                    lines.background = line_no;
                }
                "ambient" => {
                    arity(1)?;
                    ambient = float(args[0])?;
                }
                "layer" => {
                    arity(5)?;
                    layers.push(Layer {
                        depth_m: float(args[0])?,
                        region: Rect {
                            x0: coord(args[1])?,
                            y0: coord(args[2])?,
                            x1: coord(args[3])?,
                            y1: coord(args[4])?,
                        },
                    });
                    lines.layers.push(line_no);
                }
                other => {
                    return Err(Error::parse(
                        line_no,
                        format!("unknown directive `{other}`"),
                    ))
                }
            }
        }
        let background_depth_m = background
            .ok_or_else(|| Error::parse(0, "scene needs a `background <depth_m>` line"))?;
        let scene = Self {
            layers,
            background_depth_m,
            ambient_level: ambient,
        };
        scene.validate_intrinsic()?;
        Ok((scene, lines))
    }

    pub fn to_config(&self) -> String {
        let mut out = format!(
            "background {}\nambient {}\n",
            self.background_depth_m, self.ambient_level
        );
        for l in &self.layers {
            let r = l.region;
            out.push_str(&format!(
                "layer {} {} {} {} {}\n",
                l.depth_m, r.x0, r.y0, r.x1, r.y1
            ));
        }
        out
    }
}

#[derive(Default)]
struct SourceLines {
    background: usize,
    layers: Vec<usize>,
}

fn check_layer(index: usize, layer: &Layer, lens: &LensConfig) -> Result<()> {
    let zf = lens.focus_distance_m;
    if layer.depth_m <= zf {
        return Err(Error::invalid(
            "scene",
            format!(
                "layer {index} at {} m is not beyond the focus distance {zf} m; obstacles must lie at Z > Z_f",
                layer.depth_m
            ),
        ));
    }
    let r = layer.region;
    if r.x1 > lens.sensor_width_px || r.y1 > lens.sensor_height_px {
        return Err(Error::invalid(
            "scene",
            format!(
                "layer {index} region [{}, {}) x [{}, {}) exceeds the {}x{} sensor",
                r.x0, r.x1, r.y0, r.y1, lens.sensor_width_px, lens.sensor_height_px
            ),
        ));
    }
    Ok(())
}
