use std::path::Path;

use ndarray::Array2;

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::formats::pgm;
use crate::io;

/// Names of the masks shipped with the library, in benchmark order.
pub const BUILTIN_APERTURES: [&str; 6] = ["pinhole", "open", "zhou1", "zhou2", "levin", "w"];

/// Side length of the built-in mask grids.
const BUILTIN_GRID: usize = 65;
/// Diameter of the printed masks.
const DEFAULT_DIAMETER_M: f64 = 9e-3;
/// Pinhole opening relative to the full aperture (f/1.4 open vs f/16 stop).
const PINHOLE_FRACTION: f64 = 1.4 / 16.0;

/// Transmission function of the lens aperture.
///
/// The grid is square and spans the circumscribing circle of the mask;
/// values are transmissions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApertureMask {
    grid: Array2<f64>,
    physical_diameter_m: f64,
    name: String,
}

impl ApertureMask {
    /// Builds a mask, clamping values to `[0, 1]`.
    pub fn new(
        grid: Array2<f64>,
        physical_diameter_m: f64,
        name: impl Into<String>,
    ) -> Result<Self> {
        let (rows, cols) = grid.dim();
        if rows == 0 || rows != cols {
            return Err(Error::invalid(
                "aperture",
                format!("grid must be square and non-empty, got {rows}x{cols}"),
            ));
        }
        if !(physical_diameter_m > 0.0) {
            return Err(Error::invalid("aperture", "physical diameter must be > 0"));
        }
        if grid.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("aperture", "grid contains NaN"));
        }
        let grid = grid.mapv(|v| v.clamp(0.0, 1.0));
        if !grid.iter().any(|&v| v > 0.0) {
            return Err(Error::invalid("aperture", "mask is fully opaque"));
        }
        Ok(Self {
            grid,
            physical_diameter_m,
            name: name.into(),
        })
    }

    pub fn grid(&self) -> &Array2<f64> {
        &self.grid
    }

    pub fn size(&self) -> usize {
        self.grid.nrows()
    }

    pub fn physical_diameter_m(&self) -> f64 {
        self.physical_diameter_m
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// One of the six built-in masks (`pinhole`, `open`, `zhou1`, `zhou2`,
    /// `levin`, `w`).
    ///
    /// The coded patterns are reconstructions; load a PGM for exact bitmaps.
    pub fn builtin(name: &str) -> Result<Self> {
        let n = BUILTIN_GRID;
        let grid = match name {
            "pinhole" => rasterize(n, |u, v| in_disk(u, v, 0.5 * PINHOLE_FRACTION)),
            "open" => rasterize(n, |u, v| in_disk(u, v, 0.5)),
            "levin" => code_mask(n, &LEVIN_CODE),
            "zhou1" => code_mask(n, &ZHOU1_CODE),
            "zhou2" => code_mask(n, &ZHOU2_CODE),
            "w" => rasterize(n, |u, v| in_disk(u, v, 0.5) && in_w(u, v)),
            other => {
                return Err(Error::invalid(
                    "aperture",
                    format!(
                        "unknown built-in `{other}` (expected one of {})",
                        BUILTIN_APERTURES.join(", ")
                    ),
                ))
            }
        };
        Self::new(grid, DEFAULT_DIAMETER_M, name)
    }

    /// Decodes an 8-bit binary PGM (P5): 0 is opaque, 255 transparent.
    pub fn from_pgm(
        bytes: &[u8],
        physical_diameter_m: f64,
        name: impl Into<String>,
    ) -> Result<Self> {
        let raw = pgm::decode_p5(bytes)?;
        Self::new(
            raw.mapv(|v| f64::from(v) / 255.0),
            physical_diameter_m,
            name,
        )
    }

    /// Loads `path` (PGM) and its optional sidecar `<path minus extension>.cfg`
    /// holding `physical_diameter_m` and `name`.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = io::read_bytes(path)?;
        let sidecar = path.with_extension("cfg");
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        let (diameter, name) = if sidecar.exists() {
            let kv = KeyValues::parse(&io::read_to_string(&sidecar)?)?;
            (
                kv.get_or("physical_diameter_m", DEFAULT_DIAMETER_M)?,
                kv.get_or("name", stem)?,
            )
        } else {
            (DEFAULT_DIAMETER_M, stem)
        };
        Self::from_pgm(&bytes, diameter, name)
    }

    /// Resolves either a built-in name or a path to a PGM file.
    pub fn resolve(spec: &str) -> Result<Self> {
        if BUILTIN_APERTURES.contains(&spec) {
            Self::builtin(spec)
        } else {
            Self::load(Path::new(spec))
        }
    }

    /// 8-bit grayscale rendering of the mask, 255 = fully transparent.
    pub fn to_pgm(&self) -> Vec<u8> {
        pgm::encode_p5(&self.grid, 1.0)
    }

    /// Fraction of the circumscribing square that transmits light.
    pub fn open_fraction(&self) -> f64 {
        self.grid.sum() / self.grid.len() as f64
    }
}

fn rasterize(n: usize, inside: impl Fn(f64, f64) -> bool) -> Array2<f64> {
    const SS: usize = 4;
    Array2::from_shape_fn((n, n), |(i, j)| {
        let mut hits = 0;
        for sy in 0..SS {
            for sx in 0..SS {
                let u = (j as f64 + (sx as f64 + 0.5) / SS as f64) / n as f64;
                let v = (i as f64 + (sy as f64 + 0.5) / SS as f64) / n as f64;
                if inside(u, v) {
                    hits += 1;
                }
            }
        }
        hits as f64 / (SS * SS) as f64
    })
}

fn in_disk(u: f64, v: f64, radius: f64) -> bool {
    let (du, dv) = (u - 0.5, v - 0.5);
    du * du + dv * dv <= radius * radius
}

/// Binary code spanning the full mask diameter, corners clipped by the
/// circular opening.
fn code_mask<const R: usize>(n: usize, code: &[&str; R]) -> Array2<f64> {
    rasterize(n, |u, v| {
        if !in_disk(u, v, 0.5) || !(0.0..1.0).contains(&u) || !(0.0..1.0).contains(&v) {
            return false;
        }
        let row = code[(v * R as f64) as usize].as_bytes();
        row[(u * row.len() as f64) as usize] == b'1'
    })
}

const W_VERTICES: [(f64, f64); 5] = [
    (0.12, 0.24),
    (0.31, 0.80),
    (0.50, 0.40),
    (0.69, 0.80),
    (0.88, 0.24),
];
const W_HALF_WIDTH: f64 = 0.075;

fn in_w(u: f64, v: f64) -> bool {
    W_VERTICES
        .windows(2)
        .any(|seg| segment_distance((u, v), seg[0], seg[1]) <= W_HALF_WIDTH)
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * abx + (p.1 - a.1) * aby) / (abx * abx + aby * aby)).clamp(0.0, 1.0);
    let (cx, cy) = (a.0 + t * abx, a.1 + t * aby);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

const LEVIN_CODE: [&str; 7] = [
    "1110101", "1001011", "0111010", "1100111", "0101100", "1011011", "1100110",
];

const ZHOU1_CODE: [&str; 9] = [
    "110111011",
    "011001110",
    "101110101",
    "110101011",
    "011010110",
    "101011101",
    "110110010",
    "011101101",
    "101011011",
];

const ZHOU2_CODE: [&str; 9] = [
    "000111000",
    "011111110",
    "011100110",
    "111101111",
    "110111011",
    "111101111",
    "011001110",
    "011111110",
    "000111000",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid_and_distinct() {
        let masks: Vec<_> = BUILTIN_APERTURES
            .iter()
            .map(|n| ApertureMask::builtin(n).unwrap())
            .collect();
        for m in &masks {
            assert_eq!(m.size(), BUILTIN_GRID);
            assert!(m.grid().iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert_eq!(m.physical_diameter_m(), 9e-3);
        }
        for i in 0..masks.len() {
            for j in i + 1..masks.len() {
                assert_ne!(masks[i].grid(), masks[j].grid());
            }
        }
        let open = &masks[1];
        assert!((open.open_fraction() - std::f64::consts::PI / 4.0).abs() < 0.01);
        assert!(masks[0].open_fraction() < 0.01);
    }

    #[test]
    fn unknown_builtin_is_rejected() {
        assert!(ApertureMask::builtin("square").is_err());
    }

    #[test]
    fn rejects_opaque_and_non_square() {
        assert!(ApertureMask::new(Array2::zeros((4, 4)), 9e-3, "x").is_err());
        assert!(ApertureMask::new(Array2::ones((4, 5)), 9e-3, "x").is_err());
    }

    #[test]
    fn clamps_values() {
        let m = ApertureMask::new(Array2::from_elem((2, 2), 3.0), 9e-3, "x").unwrap();
        assert!(m.grid().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn pgm_round_trip_and_sidecar() {
        let w = ApertureMask::builtin("w").unwrap();
        let bytes = w.to_pgm();
        assert!(bytes.starts_with(b"P5"));
        let back = ApertureMask::from_pgm(&bytes, 9e-3, "w").unwrap();
        for (a, b) in back.grid().iter().zip(w.grid().iter()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.pgm");
        std::fs::write(&path, &bytes).unwrap();
        std::fs::write(
            dir.path().join("mask.cfg"),
            "physical_diameter_m=0.006\nname=mine\n",
        )
        .unwrap();
        let loaded = ApertureMask::load(&path).unwrap();
        assert_eq!(loaded.physical_diameter_m(), 0.006);
        assert_eq!(loaded.name(), "mine");
    }

    #[test]
    fn rejects_ascii_pgm() {
        let err = ApertureMask::from_pgm(b"P2\n2 2\n255\n0 0 0 255\n", 9e-3, "x").unwrap_err();
        assert!(err.to_string().contains("P5"), "{err}");
    }
}
