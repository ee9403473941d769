use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;

use super::detect::{detect_dots_with, DetectConfig};
use crate::error::{Error, Result};
use crate::events::{simulate_event_frame, EventFrame, MotionProfile};
use crate::optics::PsfBank;
use crate::scene::{render_latent, DotPattern, Scene};

/// Extra pixels around the widest signature in every crop.
pub const CROP_MARGIN_PX: usize = 4;

/// Template build settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignatureOptions {
    /// Sub-pixel dot phases per axis; templates are simulated at offsets
    /// `k / phases_per_axis` for `k` in `0..phases_per_axis`.
    pub phases_per_axis: usize,
    /// Ambient level of the blank background the templates are simulated on.
    pub ambient_level: f64,
    /// Extra alignment search, in whole pixels, around the centroid match.
    pub search_radius_px: usize,
}

impl Default for SignatureOptions {
    fn default() -> Self {
        Self {
            phases_per_axis: 2,
            ambient_level: 0.0,
            search_radius_px: 0,
        }
    }
}

/// One normalized event signature.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    /// Zero-mean, unit-energy crop, row-major, `crop_size^2` values.
    pub values: Vec<f64>,
    /// Event centroid in crop coordinates.
    pub centroid: (f64, f64),
    /// Sub-pixel offset of the dot the template was simulated with.
    pub phase: (f64, f64),
    /// Largest raw count before normalization.
    pub peak_count: f64,
    /// Raw event total.
    pub mass: f64,
}

/// Per-depth event signatures of a single dot under the canonical motion.
#[derive(Debug, Clone)]
pub struct SignatureBank {
    bank: Arc<PsfBank>,
    motion: MotionProfile,
    threshold: f64,
    options: SignatureOptions,
    crop_size: usize,
    max_extent_px: usize,
    link_radius_px: usize,
    /// `templates[depth][phase]`; phase 0 is the whole-pixel-aligned dot.
    templates: Vec<Vec<Template>>,
}

impl SignatureBank {
    pub fn bank(&self) -> &PsfBank {
        &self.bank
    }

    pub fn depths_m(&self) -> &[f64] {
        self.bank.depths_m()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn motion(&self) -> &MotionProfile {
        &self.motion
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn options(&self) -> &SignatureOptions {
        &self.options
    }

    /// Side of the square crops compared during decoding.
    pub fn crop_size(&self) -> usize {
        self.crop_size
    }

    /// Widest bounding box over all raw signatures.
    pub fn max_extent_px(&self) -> usize {
        self.max_extent_px
    }

    /// The aligned (phase 0) template at depth index `i`.
    pub fn template(&self, i: usize) -> &Template {
        &self.templates[i][0]
    }

    /// All phase variants at depth index `i`.
    pub fn templates_at(&self, i: usize) -> &[Template] {
        &self.templates[i]
    }

    /// Smallest link radius that keeps every signature in one blob.
    pub fn link_radius_px(&self) -> usize {
        self.link_radius_px
    }

    /// Detection settings matched to the signatures: fragments of one
    /// signature are linked, blobs wider than any signature are split.
    pub fn detect_config(&self) -> DetectConfig {
        DetectConfig {
            min_mass: 1.0,
            link_radius_px: self.link_radius_px,
            split_extent_px: Some(self.max_extent_px + 2),
            smoothing_radius_px: (self.max_extent_px / 6).max(1),
            min_peak_fraction: 0.3,
        }
    }
}

/// Simulates one dot on a blank wall at every bank depth (render, blur,
/// events, frame) and stores the normalized crops.
///
/// `dot` must hold exactly one dot; its radius and intensity are used, its
/// position is replaced by canonical sub-pixel phases.
pub fn build_signature_bank(
    bank: &PsfBank,
    dot: &DotPattern,
    motion: &MotionProfile,
    threshold: f64,
) -> Result<SignatureBank> {
    build_signature_bank_with(bank, dot, motion, threshold, SignatureOptions::default())
}

pub fn build_signature_bank_with(
    bank: &PsfBank,
    dot: &DotPattern,
    motion: &MotionProfile,
    threshold: f64,
    options: SignatureOptions,
) -> Result<SignatureBank> {
    if dot.len() != 1 {
        return Err(Error::invalid(
            "signature dot",
            format!("expected a single-dot pattern, got {} dots", dot.len()),
        ));
    }
    if options.phases_per_axis == 0 {
        return Err(Error::invalid(
            "signature options",
            "phases_per_axis must be >= 1",
        ));
    }
    motion.validate()?;
    let intensity = dot.dots()[0].intensity;
    let radius = dot.dot_radius_px();
    let lens = bank.lens();
    let (bx, by) = motion.displacement_m();
    let flow = lens.flow_px(bx.hypot(by), bank.z_min());
    let estimate = bank.max_support_px() + flow.ceil() as usize + 2 * radius.ceil() as usize + 4;
    let mut canvas = (2 * estimate).next_power_of_two().max(16);

    let p = options.phases_per_axis;
    let phases: Vec<(f64, f64)> = (0..p * p)
        .map(|k| ((k % p) as f64 / p as f64, (k / p) as f64 / p as f64))
        .collect();

    let raw = loop {
        let frames = (0..bank.len())
            .into_par_iter()
            .map(|i| {
                phases
                    .iter()
                    .map(|&ph| {
                        simulate_dot(
                            bank, canvas, ph, radius, intensity, i, motion, threshold, &options,
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let clipped = frames.iter().flatten().any(touches_border);
        if !clipped {
            break frames;
        }
        canvas *= 2;
    };

    let max_extent_px = raw
        .iter()
        .flatten()
        .filter_map(extent)
        .max()
        .ok_or_else(|| Error::Simulation("no template produced any events".into()))?;
    let crop_size = (max_extent_px + CROP_MARGIN_PX) | 1;
    let link_radius_px = raw.iter().flatten().map(link_radius).max().unwrap_or(1);

    let templates = raw
        .iter()
        .map(|per_phase| {
            per_phase
                .iter()
                .zip(&phases)
                .map(|(frame, &phase)| make_template(frame, crop_size, phase))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SignatureBank {
        bank: Arc::new(bank.clone()),
        motion: *motion,
        threshold,
        options,
        crop_size,
        max_extent_px,
        link_radius_px,
        templates,
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate_dot(
    bank: &PsfBank,
    canvas: usize,
    phase: (f64, f64),
    radius: f64,
    intensity: f64,
    depth_index: usize,
    motion: &MotionProfile,
    threshold: f64,
    options: &SignatureOptions,
) -> Result<EventFrame> {
    let lens = bank.lens().with_sensor(canvas, canvas);
    let c = (canvas / 2) as f64;
    // canvas is a power of two, so these positions survive the round trip
    // through normalized coordinates exactly
    let pattern = DotPattern::single(
        (c + phase.0) / canvas as f64,
        (c + phase.1) / canvas as f64,
        intensity,
        radius,
    )?;
    let mut scene = Scene::wall(bank.depths_m()[depth_index]);
    scene.ambient_level = options.ambient_level;
    let latent = render_latent(&scene, &pattern, &lens)?;
    simulate_event_frame(&latent, bank, motion, threshold)
}

fn link_radius(frame: &EventFrame) -> usize {
    (1..)
        .find(|&r| {
            let cfg = DetectConfig {
                min_mass: 0.0,
                link_radius_px: r,
                ..DetectConfig::default()
            };
            detect_dots_with(frame, &cfg).len() <= 1
        })
        .expect("a large enough radius links everything")
}

fn touches_border(frame: &EventFrame) -> bool {
    let (h, w) = frame.counts.dim();
    frame
        .counts
        .indexed_iter()
        .any(|((y, x), &v)| v != 0.0 && (x == 0 || y == 0 || x == w - 1 || y == h - 1))
}

fn extent(frame: &EventFrame) -> Option<usize> {
    let mut bb: Option<(usize, usize, usize, usize)> = None;
    for ((y, x), &v) in frame.counts.indexed_iter() {
        if v != 0.0 {
            bb = Some(match bb {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
    }
    bb.map(|(x0, y0, x1, y1)| (x1 - x0 + 1).max(y1 - y0 + 1))
}

/// Event centroid in pixel-centre coordinates, summed in raster order like
/// the detector.
pub(crate) fn centroid(counts: &Array2<f64>) -> Option<(f64, f64)> {
    let (mut m, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for ((y, x), &c) in counts.indexed_iter() {
        if c > 0.0 {
            m += c;
            sx += c * (x as f64 + 0.5);
            sy += c * (y as f64 + 0.5);
        }
    }
    (m > 0.0).then(|| (sx / m, sy / m))
}

fn make_template(frame: &EventFrame, size: usize, phase: (f64, f64)) -> Result<Template> {
    let (cx, cy) = centroid(&frame.counts)
        .ok_or_else(|| Error::Simulation(format!("dot at phase {phase:?} produced no events")))?;
    let half = (size / 2) as f64;
    let ox = (cx - half).round() as isize;
    let oy = (cy - half).round() as isize;
    let (h, w) = frame.counts.dim();
    let mut values = Vec::with_capacity(size * size);
    for y in 0..size as isize {
        for x in 0..size as isize {
            let (fx, fy) = (ox + x, oy + y);
            let inside = fx >= 0 && fy >= 0 && (fx as usize) < w && (fy as usize) < h;
            values.push(if inside {
                frame.counts[[fy as usize, fx as usize]]
            } else {
                0.0
            });
        }
    }
    let mass: f64 = values.iter().sum();
    if (mass - frame.total()).abs() > 1e-9 * mass.max(1.0) {
        return Err(Error::Simulation(
            "template crop cut off part of the signature".into(),
        ));
    }
    let peak_count = values.iter().copied().fold(0.0, f64::max);
    let values = normalize(&values)
        .ok_or_else(|| Error::Simulation(format!("flat template at phase {phase:?}")))?;
    Ok(Template {
        values,
        centroid: (cx - ox as f64, cy - oy as f64),
        phase,
        peak_count,
        mass,
    })
}

/// Zero-mean, unit-energy copy; `None` for a constant input.
pub(crate) fn normalize(values: &[f64]) -> Option<Vec<f64>> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let energy = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
    (energy > 0.0).then(|| centered.iter().map(|v| v / energy).collect())
}
