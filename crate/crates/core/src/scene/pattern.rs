use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::strip_comment;
use crate::error::{Error, Result};

/// One projected dot in normalized projector coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dot {
    pub x: f64,
    pub y: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DotLayout {
    Grid { nx: usize, ny: usize },
    Pseudorandom { seed: u64 },
    Custom,
}

/// Structured-light dot pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DotPattern {
    dots: Vec<Dot>,
    dot_radius_px: f64,
    layout: DotLayout,
}

pub const DEFAULT_DOT_COUNT: usize = 400;
pub const DEFAULT_DOT_RADIUS_PX: f64 = 1.5;

impl Default for DotPattern {
    fn default() -> Self {
        Self::pseudorandom(DEFAULT_DOT_COUNT, 0, 1.0, DEFAULT_DOT_RADIUS_PX)
            .expect("default pattern parameters are valid")
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            "dot pattern",
            format!("dot radius must be > 0, got {r}"),
        ))
    }
}

fn check_intensity(i: f64) -> Result<()> {
    if i > 0.0 && i <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "dot pattern",
            format!("dot intensity must lie in (0, 1], got {i}"),
        ))
    }
}

impl DotPattern {
    pub fn from_dots(dots: Vec<Dot>, dot_radius_px: f64) -> Result<Self> {
        check_radius(dot_radius_px)?;
        for d in &dots {
            if !(0.0..=1.0).contains(&d.x) || !(0.0..=1.0).contains(&d.y) {
                return Err(Error::invalid(
                    "dot pattern",
                    format!("dot ({}, {}) outside [0,1]^2", d.x, d.y),
                ));
            }
            check_intensity(d.intensity)?;
        }
        Ok(Self {
            dots,
            dot_radius_px,
            layout: DotLayout::Custom,
        })
    }

    /// A single dot, used as the canonical probe for signature templates.
    pub fn single(x: f64, y: f64, intensity: f64, dot_radius_px: f64) -> Result<Self> {
        Self::from_dots(vec![Dot { x, y, intensity }], dot_radius_px)
    }

    /// Regular `nx x ny` grid with dots at cell centres.
    pub fn grid(nx: usize, ny: usize, intensity: f64, dot_radius_px: f64) -> Result<Self> {
        check_radius(dot_radius_px)?;
        check_intensity(intensity)?;
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("dot pattern", "grid needs nx, ny >= 1"));
        }
        let dots = (0..ny)
            .flat_map(|j| {
                (0..nx).map(move |i| Dot {
                    x: (i as f64 + 0.5) / nx as f64,
                    y: (j as f64 + 0.5) / ny as f64,
                    intensity,
                })
            })
            .collect();
        Ok(Self {
            dots,
            dot_radius_px,
            layout: DotLayout::Grid { nx, ny },
        })
    }

    /// Dots every `spacing_px` pixels on a `width x height` sensor, at least
    /// `margin_px` from the border, shifted by the sub-pixel `offset_px`.
    ///
    /// With a spacing wider than the largest event signature, every dot's
    /// signature stays isolated.
    pub fn pixel_grid(
        width: usize,
        height: usize,
        spacing_px: usize,
        margin_px: usize,
        offset_px: (f64, f64),
        intensity: f64,
        dot_radius_px: f64,
    ) -> Result<Self> {
        check_radius(dot_radius_px)?;
        check_intensity(intensity)?;
        if spacing_px == 0 {
            return Err(Error::invalid(
                "dot pattern",
                "grid spacing must be >= 1 px",
            ));
        }
        let axis = |len: usize| -> Vec<usize> {
            if len < 2 * margin_px + 1 {
                return Vec::new();
            }
            let count = (len - 2 * margin_px - 1) / spacing_px + 1;
            // centre the lattice between the margins
            let start = margin_px + (len - 2 * margin_px - 1 - (count - 1) * spacing_px) / 2;
            (0..count).map(|k| start + k * spacing_px).collect()
        };
        let (xs, ys) = (axis(width), axis(height));
        let dots = ys
            .iter()
            .flat_map(|&y| {
                xs.iter().map(move |&x| Dot {
                    x: (x as f64 + offset_px.0) / width as f64,
                    y: (y as f64 + offset_px.1) / height as f64,
                    intensity,
                })
            })
            .collect();
        Ok(Self {
            dots,
            dot_radius_px,
            layout: DotLayout::Custom,
        })
    }

    /// `n` dots placed by seeded dart throwing with a soft minimum spacing.
    pub fn pseudorandom(n: usize, seed: u64, intensity: f64, dot_radius_px: f64) -> Result<Self> {
        check_radius(dot_radius_px)?;
        check_intensity(intensity)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let min_sep = if n > 0 { 0.5 / (n as f64).sqrt() } else { 0.0 };
        let mut dots: Vec<Dot> = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while dots.len() < n {
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            attempts += 1;
            // Give up on spacing once the budget is spent so n is always met.
            let spaced = attempts > 100 * n
                || dots
                    .iter()
                    .all(|d| (d.x - x).powi(2) + (d.y - y).powi(2) >= min_sep * min_sep);
            if spaced {
                dots.push(Dot { x, y, intensity });
            }
        }
        Ok(Self {
            dots,
            dot_radius_px,
            layout: DotLayout::Pseudorandom { seed },
        })
    }

    /// Parses the pattern file format: one of `grid <nx> <ny> <intensity>` or
    /// `random <n> <seed> <intensity>`, plus an optional `radius <px>`.
    pub fn from_config(text: &str) -> Result<Self> {
        enum Kind {
            Grid(usize, usize, f64),
            Random(usize, u64, f64),
        }
        let mut kind = None;
        let mut radius = DEFAULT_DOT_RADIUS_PX;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let tokens: Vec<&str> = strip_comment(raw).split_whitespace().collect();
            let Some((&head, args)) = tokens.split_first() else {
                continue;
            };
            let num = |i: usize| -> Result<&str> {
                args.get(i).copied().ok_or_else(|| {
                    Error::parse(line_no, format!("`{head}` expects more arguments"))
                })
            };
            let bad =
                |what: &str| Error::parse(line_no, format!("invalid {what} in `{}`", raw.trim()));
            let expect_args = |n: usize| -> Result<()> {
                if args.len() == n {
                    Ok(())
                } else {
                    Err(Error::parse(
                        line_no,
                        format!("`{head}` takes {n} arguments, got {}", args.len()),
                    ))
                }
            };
            match head {
                "grid" | "random" => {
                    expect_args(3)?;
                    if kind.is_some() {
                        return Err(Error::parse(line_no, "layout given twice"));
                    }
                    let a: usize = num(0)?.parse().map_err(|_| bad("count"))?;
                    let intensity: f64 = num(2)?.parse().map_err(|_| bad("intensity"))?;
                    kind = Some(if head == "grid" {
                        let ny: usize = num(1)?.parse().map_err(|_| bad("count"))?;
                        Kind::Grid(a, ny, intensity)
                    } else {
                        let seed: u64 = num(1)?.parse().map_err(|_| bad("seed"))?;
                        Kind::Random(a, seed, intensity)
                    });
                }
                "radius" => {
                    expect_args(1)?;
                    radius = num(0)?.parse().map_err(|_| bad("radius"))?;
                }
                other => {
                    return Err(Error::parse(
                        line_no,
                        format!("unknown directive `{other}`"),
                    ))
                }
            }
        }
        match kind {
            Some(Kind::Grid(nx, ny, i)) => Self::grid(nx, ny, i, radius),
            Some(Kind::Random(n, seed, i)) => Self::pseudorandom(n, seed, i, radius),
            None => Err(Error::parse(
                0,
                "pattern needs a `grid` or `random` directive",
            )),
        }
    }

    pub fn dots(&self) -> &[Dot] {
        &self.dots
    }

    pub fn dot_radius_px(&self) -> f64 {
        self.dot_radius_px
    }

    pub fn layout(&self) -> DotLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.dots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dots.is_empty()
    }

    /// Shifts every dot by `(dx, dy)` in normalized coordinates, dropping dots
    /// that leave the unit square.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let dots = self
            .dots
            .iter()
            .map(|d| Dot {
                x: d.x + dx,
                y: d.y + dy,
                intensity: d.intensity,
            })
            .filter(|d| (0.0..=1.0).contains(&d.x) && (0.0..=1.0).contains(&d.y))
            .collect();
        Self {
            dots,
            dot_radius_px: self.dot_radius_px,
            layout: self.layout,
        }
    }
}
