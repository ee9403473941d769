use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{BlurredImage, EventFrame, LayeredRenderer, MotionProfile, LOG_EPS};
use crate::error::{Error, Result};
use crate::optics::PsfBank;
use crate::scene::LatentImage;

/// A single contrast event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub x: u32,
    pub y: u32,
    pub t: f64,
    /// +1 for a brightness increase, -1 for a decrease.
    pub p: i8,
}

/// Events from one accumulation window, ordered pixel-major then by time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventVolume {
    pub events: Vec<Event>,
    pub duration_s: f64,
}

impl EventVolume {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Debug export: header `x,y,t,p`, one event per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,t,p\n");
        for e in &self.events {
            out.push_str(&format!("{},{},{:.9},{}\n", e.x, e.y, e.t, e.p));
        }
        out
    }
}

/// Per-pixel integrate-and-fire state over a stream of frames.
struct ContrastEngine {
    width: usize,
    threshold: f64,
    reference: Vec<f64>,
    previous: Vec<f64>,
    region: (usize, usize, usize, usize),
    ambient: f64,
    ambient_log: f64,
}

#[inline]
fn log_intensity(v: f64) -> f64 {
    (v + LOG_EPS).ln()
}

/// Crossing record handed to sinks: `n` events of polarity `p` at `pixel`,
/// with the log level moving from `previous` to `current` while the reference
/// started at `reference`.
struct Crossing {
    pixel: usize,
    n: u32,
    p: i8,
    reference: f64,
    previous: f64,
    current: f64,
}

impl ContrastEngine {
    fn new(
        first: &Array2<f64>,
        threshold: f64,
        region: (usize, usize, usize, usize),
        ambient: f64,
    ) -> Self {
        let reference: Vec<f64> = first.iter().map(|&v| log_intensity(v)).collect();
        Self {
            width: first.ncols(),
            threshold,
            previous: reference.clone(),
            reference,
            region,
            ambient,
            ambient_log: log_intensity(ambient),
        }
    }

    /// Feeds the next frame; calls `sink` once per pixel that fired.
    fn step(&mut self, frame: &Array2<f64>, mut sink: impl FnMut(&Crossing)) {
        let data = frame.as_slice().expect("standard layout");
        let (x0, y0, x1, y1) = self.region;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let i = y * self.width + x;
                let v = data[i];
                let current = if v == self.ambient {
                    self.ambient_log
                } else {
                    log_intensity(v)
                };
                let reference = self.reference[i];
                let delta = current - reference;
                let n = (delta.abs() / self.threshold).floor();
                if n >= 1.0 {
                    let p: i8 = if delta > 0.0 { 1 } else { -1 };
                    sink(&Crossing {
                        pixel: i,
                        n: n as u32,
                        p,
                        reference,
                        previous: self.previous[i],
                        current,
                    });
                    self.reference[i] = reference + f64::from(p) * n * self.threshold;
                }
                self.previous[i] = current;
            }
        }
    }
}

fn full_region(img: &Array2<f64>) -> (usize, usize, usize, usize) {
    (0, 0, img.ncols() - 1, img.nrows() - 1)
}

/// Region to process: where the renderer can deviate from ambient, widened to
/// the whole frame if the starting image has signal elsewhere.
fn event_region(
    renderer: &LayeredRenderer<'_>,
    first: &Array2<f64>,
    max_baseline: (f64, f64),
) -> Option<(usize, usize, usize, usize)> {
    let region = renderer.active_region(max_baseline);
    let ambient = renderer.ambient();
    let inside = |x: usize, y: usize| match region {
        Some((x0, y0, x1, y1)) => x >= x0 && x <= x1 && y >= y0 && y <= y1,
        None => false,
    };
    let stray = first
        .indexed_iter()
        .any(|((y, x), &v)| v != ambient && !inside(x, y));
    if stray {
        Some(full_region(first))
    } else {
        region
    }
}

/// Runs the contrast model along a sequence of camera displacements with
/// matching timestamps. The first entry is the reference pose.
fn run_path(
    renderer: &LayeredRenderer<'_>,
    first: &Array2<f64>,
    path: &[((f64, f64), f64)],
    threshold: f64,
    mut sink: impl FnMut(&Crossing, f64, f64),
) {
    let max_baseline = path.iter().fold((0.0f64, 0.0f64), |acc, &((bx, by), _)| {
        (
            if bx.abs() > acc.0.abs() { bx } else { acc.0 },
            if by.abs() > acc.1.abs() { by } else { acc.1 },
        )
    });
    let Some(region) = event_region(renderer, first, max_baseline) else {
        return;
    };
    let mut engine = ContrastEngine::new(first, threshold, region, renderer.ambient());
    for pair in path.windows(2) {
        let (t0, t1) = (pair[0].1, pair[1].1);
        let frame = renderer.render(pair[1].0);
        engine.step(&frame, |c| sink(c, t0, t1));
    }
}

/// Expands crossings into individual events with timestamps interpolated
/// linearly in log intensity between the two frames.
fn push_events(
    out: &mut Vec<(usize, Event)>,
    c: &Crossing,
    width: usize,
    threshold: f64,
    t0: f64,
    t1: f64,
) {
    let x = (c.pixel % width) as u32;
    let y = (c.pixel / width) as u32;
    let span = c.current - c.previous;
    for j in 1..=c.n {
        let level = c.reference + f64::from(c.p) * f64::from(j) * threshold;
        let frac = if span != 0.0 {
            ((level - c.previous) / span).clamp(0.0, 1.0)
        } else {
            1.0
        };
        out.push((
            c.pixel,
            Event {
                x,
                y,
                t: t0 + frac * (t1 - t0),
                p: c.p,
            },
        ));
    }
}

fn finish_volume(mut tagged: Vec<(usize, Event)>, duration_s: f64) -> EventVolume {
    // stable: keeps time order within a pixel
    tagged.sort_by_key(|(pixel, _)| *pixel);
    EventVolume {
        events: tagged.into_iter().map(|(_, e)| e).collect(),
        duration_s,
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "contrast threshold must be > 0, got {threshold}"
        )))
    }
}

fn linear_path(motion: &MotionProfile) -> Vec<((f64, f64), f64)> {
    (0..=motion.substeps)
        .map(|k| (motion.displacement_at(k), motion.time_at(k)))
        .collect()
}

/// Simulates the event stream produced while the camera translates laterally.
///
/// `img` is the defocused image at the start of the window (as returned by
/// [`blur_image`](super::blur_image)); every later substep re-renders each
/// depth layer shifted by its own flow. A pixel fires whenever its
/// log-intensity moves a full `threshold` away from its reference level.
pub fn generate_events(
    img: &BlurredImage,
    latent: &LatentImage,
    bank: &PsfBank,
    motion: &MotionProfile,
    threshold: f64,
) -> Result<EventVolume> {
    check_threshold(threshold)?;
    motion.validate()?;
    let renderer = LayeredRenderer::new(latent, bank)?;
    if img.intensity.dim() != (renderer.height(), renderer.width()) {
        return Err(Error::invalid(
            "blurred image",
            "size differs from the latent image",
        ));
    }
    let width = renderer.width();
    let mut tagged = Vec::new();
    run_path(
        &renderer,
        &img.intensity,
        &linear_path(motion),
        threshold,
        |c, t0, t1| push_events(&mut tagged, c, width, threshold, t0, t1),
    );
    Ok(finish_volume(tagged, motion.accumulation_time_s))
}

/// Back-and-forth oscillation: one pass with `motion`, then the reverse pass
/// back to the start. Events span `[0, 2 dT]`.
pub fn generate_oscillation_events(
    latent: &LatentImage,
    bank: &PsfBank,
    motion: &MotionProfile,
    threshold: f64,
) -> Result<EventVolume> {
    check_threshold(threshold)?;
    motion.validate()?;
    let renderer = LayeredRenderer::new(latent, bank)?;
    let first = renderer.render((0.0, 0.0));
    let mut path = linear_path(motion);
    let dt = motion.accumulation_time_s;
    for k in 1..=motion.substeps {
        path.push((
            motion.displacement_at(motion.substeps - k),
            dt + motion.time_at(k),
        ));
    }
    let width = renderer.width();
    let mut tagged = Vec::new();
    run_path(&renderer, &first, &path, threshold, |c, t0, t1| {
        push_events(&mut tagged, c, width, threshold, t0, t1)
    });
    Ok(finish_volume(tagged, 2.0 * dt))
}

/// Renders, moves and accumulates straight into an event frame without
/// materializing individual events. Equivalent to
/// `event_frame(generate_events(blur_image(..), ..))`.
pub fn simulate_event_frame(
    latent: &LatentImage,
    bank: &PsfBank,
    motion: &MotionProfile,
    threshold: f64,
) -> Result<EventFrame> {
    check_threshold(threshold)?;
    motion.validate()?;
    let renderer = LayeredRenderer::new(latent, bank)?;
    let first = renderer.render((0.0, 0.0));
    let mut counts = vec![0.0f64; renderer.width() * renderer.height()];
    run_path(
        &renderer,
        &first,
        &linear_path(motion),
        threshold,
        |c, _, _| {
            counts[c.pixel] += f64::from(c.n);
        },
    );
    let counts = Array2::from_shape_vec((renderer.height(), renderer.width()), counts)
        .expect("buffer matches frame size");
    Ok(EventFrame { counts })
}

/// Integrate-and-fire over an explicit image sequence (`frames[k]` observed
/// at `times[k]`); the first frame sets the reference levels.
pub fn integrate_and_fire(
    frames: &[Array2<f64>],
    times: &[f64],
    threshold: f64,
) -> Result<EventVolume> {
    check_threshold(threshold)?;
    if frames.len() != times.len() || frames.is_empty() {
        return Err(Error::invalid(
            "frame sequence",
            "need one timestamp per frame and at least one frame",
        ));
    }
    let dim = frames[0].dim();
    if frames.iter().any(|f| f.dim() != dim) {
        return Err(Error::invalid("frame sequence", "frames differ in size"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid(
            "frame sequence",
            "timestamps must be non-decreasing",
        ));
    }
    if frames
        .iter()
        .any(|f| f.iter().any(|&v| !(v >= 0.0) || !v.is_finite()))
    {
        return Err(Error::invalid(
            "frame sequence",
            "intensities must be finite and non-negative",
        ));
    }
    let first = &frames[0];
    let width = first.ncols();
    let mut engine = ContrastEngine::new(first, threshold, full_region(first), f64::NAN);
    let mut tagged = Vec::new();
    for k in 1..frames.len() {
        let (t0, t1) = (times[k - 1], times[k]);
        engine.step(&frames[k], |c| {
            push_events(&mut tagged, c, width, threshold, t0, t1)
        });
    }
    Ok(finish_volume(tagged, times[times.len() - 1] - times[0]))
}
