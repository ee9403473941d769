use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::KeyValues;
use crate::decoder::{
    build_signature_bank_with, decode_sparse, detect_dots_with, SignatureBank, SignatureOptions,
};
use crate::error::{Error, Result};
use crate::events::{simulate_event_frame, MotionProfile, DEFAULT_THRESHOLD};
use crate::optics::{
    build_psf_bank, build_psf_bank_at, ApertureMask, LensConfig, BUILTIN_APERTURES,
};
use crate::scene::{render_latent, DotPattern, Scene, DEFAULT_DOT_RADIUS_PX};

/// Bank range around the sweep: `[min * BANK_NEAR, max * BANK_FAR]`.
const BANK_NEAR: f64 = 0.95;
const BANK_FAR: f64 = 1.05;

/// Aperture x focus-distance x object-distance sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    /// Built-in names or PGM paths.
    pub apertures: Vec<String>,
    pub focus_distances_m: Vec<f64>,
    pub object_distances_m: Vec<f64>,
    pub lens: LensConfig,
    pub motion: MotionProfile,
    pub threshold: f64,
    pub trials: usize,
    pub seed: u64,
    pub bank_depths: usize,
    pub phases_per_axis: usize,
    pub dot_radius_px: f64,
    /// Denominator of the percent error; the sweep spans `[0, depth_range_m]`
    /// from the camera.
    pub depth_range_m: f64,
    /// Measure decode wall time. Off by default so output is reproducible.
    pub record_timing: bool,
}

impl Default for BenchSpec {
    fn default() -> Self {
        let object_distances_m = default_object_distances();
        Self {
            apertures: BUILTIN_APERTURES.iter().map(|s| s.to_string()).collect(),
            focus_distances_m: vec![0.25, 0.50, 0.75],
            depth_range_m: object_distances_m[object_distances_m.len() - 1],
            object_distances_m,
            lens: LensConfig::default(),
            motion: MotionProfile::default(),
            threshold: DEFAULT_THRESHOLD,
            trials: 3,
            seed: 0,
            bank_depths: 128,
            phases_per_axis: 2,
            dot_radius_px: DEFAULT_DOT_RADIUS_PX,
            record_timing: false,
        }
    }
}

/// 0.8 m to 2.5 m in 0.1 m steps.
pub fn default_object_distances() -> Vec<f64> {
    (8..=25).map(|k| k as f64 / 10.0).collect()
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        self.lens.validate()?;
        self.motion.validate()?;
        if self.apertures.is_empty()
            || self.focus_distances_m.is_empty()
            || self.object_distances_m.is_empty()
        {
            return Err(Error::invalid(
                "bench spec",
                "apertures, focus and object distances must be non-empty",
            ));
        }
        if self.trials == 0 {
            return Err(Error::invalid("bench spec", "trials must be >= 1"));
        }
        if self.bank_depths < 2 {
            return Err(Error::invalid("bench spec", "bank_depths must be >= 2"));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::invalid("bench spec", "threshold must be > 0"));
        }
        if !(self.depth_range_m > 0.0) {
            return Err(Error::invalid("bench spec", "depth_range_m must be > 0"));
        }
        let zf_max = self
            .focus_distances_m
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if let Some(z) = self.object_distances_m.iter().find(|&&z| !(z > zf_max)) {
            return Err(Error::invalid(
                "bench spec",
                format!(
                    "object distance {z} m is not beyond every focus distance (max {zf_max} m)"
                ),
            ));
        }
        Ok(())
    }

    /// Parses a key=value spec; unspecified keys keep their defaults.
    ///
    /// Keys: `apertures`, `focus_distances_m`, `object_distances_m` (list) or
    /// `z_start_m`/`z_stop_m`/`z_step_m`, `trials`, `seed`, `bank_depths`,
    /// `phases_per_axis`, `threshold`, `dot_radius_px`, `depth_range_m`,
    /// `record_timing`, plus all lens and motion keys.
    pub fn from_config(text: &str) -> Result<Self> {
        Self::from_key_values(&KeyValues::parse(text)?)
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let object_distances_m = match kv.get_list("object_distances_m")? {
            Some(list) => list,
            None if kv.contains("z_start_m")
                || kv.contains("z_stop_m")
                || kv.contains("z_step_m") =>
            {
                let start: f64 = kv.get("z_start_m")?;
                let stop: f64 = kv.get("z_stop_m")?;
                let step: f64 = kv.get("z_step_m")?;
                if !(step > 0.0) || !(stop >= start) {
                    return Err(Error::invalid(
                        "bench spec",
                        "need z_step_m > 0 and z_stop_m >= z_start_m",
                    ));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|k| start + k as f64 * step).collect()
            }
            None => d.object_distances_m.clone(),
        };
        let spec = Self {
            apertures: kv.get_list("apertures")?.unwrap_or(d.apertures),
            focus_distances_m: kv
                .get_list("focus_distances_m")?
                .unwrap_or(d.focus_distances_m),
            depth_range_m: kv.get_or(
                "depth_range_m",
                object_distances_m.iter().copied().fold(0.0, f64::max),
            )?,
            object_distances_m,
            lens: LensConfig::from_key_values(kv)?,
            motion: MotionProfile::from_key_values(kv)?,
            threshold: kv.get_or("threshold", d.threshold)?,
            trials: kv.get_or("trials", d.trials)?,
            seed: kv.get_or("seed", d.seed)?,
            bank_depths: kv.get_or("bank_depths", d.bank_depths)?,
            phases_per_axis: kv.get_or("phases_per_axis", d.phases_per_axis)?,
            dot_radius_px: kv.get_or("dot_radius_px", d.dot_radius_px)?,
            record_timing: kv.get_or("record_timing", d.record_timing)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Bank range shared by every cell at focus distance `zf`.
    pub fn bank_range(&self, zf: f64) -> (f64, f64) {
        let lo = self
            .object_distances_m
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .object_distances_m
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        // stay beyond the focus distance even when the sweep starts close to it
        let near = (lo * BANK_NEAR).max(zf + 0.5 * (lo - zf));
        (near, hi * BANK_FAR)
    }
}

/// Metrics of one (aperture, focus distance, object distance) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub aperture: String,
    pub focus_distance_m: f64,
    pub object_distance_m: f64,
    /// Mean over trials of the mean |estimate - truth| over decoded dots.
    pub l1_error_m: f64,
    /// `100 * l1 / depth_range`.
    pub percent_error: f64,
    /// Mean event total per trial.
    pub event_count: f64,
    pub decode_time_s: f64,
    /// Failure message; metrics are NaN when set.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub spec: BenchSpec,
    pub cells: Vec<BenchCell>,
}

pub const CSV_HEADER: &str = "aperture,Zf_m,z_m,l1_m,pct,events,decode_s";

impl BenchResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                c.aperture,
                c.focus_distance_m,
                c.object_distance_m,
                c.l1_error_m,
                c.percent_error,
                c.event_count,
                c.decode_time_s
            ));
        }
        out
    }

    pub fn cells_for<'a>(
        &'a self,
        aperture: &'a str,
        zf: f64,
    ) -> impl Iterator<Item = &'a BenchCell> + 'a {
        self.cells
            .iter()
            .filter(move |c| c.aperture == aperture && c.focus_distance_m == zf)
    }

    /// Mean L1 over the successful cells of one aperture and focus distance.
    pub fn mean_l1(&self, aperture: &str, zf: f64) -> Option<f64> {
        let errs: Vec<f64> = self
            .cells_for(aperture, zf)
            .filter(|c| c.error.is_none())
            .map(|c| c.l1_error_m)
            .collect();
        (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
    }

    pub fn failures(&self) -> impl Iterator<Item = &BenchCell> {
        self.cells.iter().filter(|c| c.error.is_some())
    }
}

/// Percent error convention: L1 over the depth range, in percent.
pub fn percent_error(l1_m: f64, depth_range_m: f64) -> f64 {
    100.0 * l1_m / depth_range_m
}

/// Runs every cell. Failures are recorded per cell; the sweep continues.
/// Cells come back aperture-major, then focus distance, then object distance.
pub fn run_sweep(spec: &BenchSpec) -> Result<BenchResult> {
    spec.validate()?;
    let groups: Vec<(usize, usize)> = (0..spec.apertures.len())
        .flat_map(|a| (0..spec.focus_distances_m.len()).map(move |f| (a, f)))
        .collect();
    let cells = groups
        .par_iter()
        .map(|&(a, f)| run_group(spec, a, f))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(BenchResult {
        spec: spec.clone(),
        cells,
    })
}

fn run_group(spec: &BenchSpec, a: usize, f: usize) -> Vec<BenchCell> {
    let name = &spec.apertures[a];
    let zf = spec.focus_distances_m[f];
    let failed = |z: f64, msg: String| BenchCell {
        aperture: name.clone(),
        focus_distance_m: zf,
        object_distance_m: z,
        l1_error_m: f64::NAN,
        percent_error: f64::NAN,
        event_count: f64::NAN,
        decode_time_s: f64::NAN,
        error: Some(msg),
    };
    let setup = (|| {
        let aperture = ApertureMask::resolve(name)?;
        let lens = spec.lens.with_focus(zf);
        let (lo, hi) = spec.bank_range(zf);
        let bank = build_psf_bank(&lens, &aperture, lo, hi, spec.bank_depths)?;
        let opts = SignatureOptions {
            phases_per_axis: spec.phases_per_axis,
            ..SignatureOptions::default()
        };
        let dot = DotPattern::single(0.5, 0.5, 1.0, spec.dot_radius_px)?;
        let sig = build_signature_bank_with(&bank, &dot, &spec.motion, spec.threshold, opts)?;
        Ok::<_, Error>((aperture, lens, sig))
    })();
    let (aperture, lens, sig) = match setup {
        Ok(s) => s,
        Err(e) => {
            return spec
                .object_distances_m
                .iter()
                .map(|&z| failed(z, e.to_string()))
                .collect()
        }
    };
    spec.object_distances_m
        .par_iter()
        .map(|&z| {
            run_cell(spec, name, &aperture, &lens, &sig, z)
                .unwrap_or_else(|e| failed(z, e.to_string()))
        })
        .collect()
}

fn run_cell(
    spec: &BenchSpec,
    name: &str,
    aperture: &ApertureMask,
    lens: &LensConfig,
    sig: &SignatureBank,
    z: f64,
) -> Result<BenchCell> {
    let scene_bank = build_psf_bank_at(lens, aperture, &[z])?;
    let spacing = sig.crop_size() + 2;
    let (mut l1, mut events, mut seconds) = (0.0, 0.0, 0.0);
    for trial in 0..spec.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(cell_stream(lens.focus_distance_m, z, trial));
        let offset = (rng.random::<f64>(), rng.random::<f64>());
        let pattern = DotPattern::pixel_grid(
            lens.sensor_width_px,
            lens.sensor_height_px,
            spacing,
            sig.crop_size(),
            offset,
            1.0,
            spec.dot_radius_px,
        )?;
        let latent = render_latent(&Scene::wall(z), &pattern, lens)?;
        let frame = simulate_event_frame(&latent, &scene_bank, &spec.motion, spec.threshold)?;
        let start = Instant::now();
        let centroids = detect_dots_with(&frame, &sig.detect_config());
        let decoded = decode_sparse(&frame, sig, &centroids)?;
        let elapsed = start.elapsed().as_secs_f64();
        if decoded.points.is_empty() {
            return Err(Error::Simulation(format!("no dot decoded at z = {z} m")));
        }
        l1 += decoded
            .points
            .iter()
            .map(|p| (p.depth_m - z).abs())
            .sum::<f64>()
            / decoded.points.len() as f64;
        events += frame.total();
        seconds += elapsed;
    }
    let n = spec.trials as f64;
    let l1 = l1 / n;
    Ok(BenchCell {
        aperture: name.to_string(),
        focus_distance_m: lens.focus_distance_m,
        object_distance_m: z,
        l1_error_m: l1,
        percent_error: percent_error(l1, spec.depth_range_m),
        event_count: events / n,
        decode_time_s: if spec.record_timing { seconds / n } else { 0.0 },
        error: None,
    })
}

/// RNG stream per (focus, distance, trial). Every aperture sees the same dot
/// offsets, and results depend neither on scheduling nor on which other
/// cells the spec contains.
fn cell_stream(zf: f64, z: f64, trial: usize) -> u64 {
    fn mix(mut x: u64) -> u64 {
        // splitmix64 finalizer
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x ^ (x >> 31)
    }
    mix(zf.to_bits() ^ mix(z.to_bits() ^ mix(trial as u64)))
}
