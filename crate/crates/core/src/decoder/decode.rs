use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::signature::{normalize, SignatureBank};
use crate::error::{Error, Result};
use crate::events::EventFrame;

/// Score margin mapped to confidence 0.5.
pub const CONFIDENCE_MIDPOINT: f64 = 0.05;
/// Logistic width of the margin-to-confidence map.
pub const CONFIDENCE_SCALE: f64 = 0.02;
/// Competing score peaks shallower than this are treated as ripple.
pub const PEAK_PROMINENCE: f64 = 0.01;
/// Scores closer than this are a tie (resolved toward the nearer depth).
const TIE_EPS: f64 = 1e-12;

/// One decoded dot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsePoint {
    pub x: f64,
    pub y: f64,
    pub depth_m: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseDecode {
    pub points: Vec<SparsePoint>,
    /// Centroids too close to the border for a full crop.
    pub skipped: Vec<(f64, f64)>,
}

pub fn confidence_from_margin(margin: f64) -> f64 {
    1.0 / (1.0 + (-(margin - CONFIDENCE_MIDPOINT) / CONFIDENCE_SCALE).exp())
}

/// Matches the crop around every centroid against all templates with
/// normalized cross-correlation and keeps the best-scoring depth.
///
/// Templates are aligned by their event centroid; each phase variant and
/// each offset within the bank's search radius is tried. The confidence
/// compares the best score with the best competing local peak of the
/// score-versus-depth curve (or its minimum when there is none).
pub fn decode_sparse(
    frame: &EventFrame,
    sig: &SignatureBank,
    centroids: &[(f64, f64)],
) -> Result<SparseDecode> {
    if frame.counts.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("event frame", "counts must be finite"));
    }
    let results: Vec<Option<SparsePoint>> = centroids
        .par_iter()
        .map(|&c| decode_one(frame, sig, c))
        .collect();
    let mut out = SparseDecode::default();
    for (r, &c) in results.into_iter().zip(centroids) {
        match r {
            Some(p) => out.points.push(p),
            None => out.skipped.push(c),
        }
    }
    Ok(out)
}

/// NCC score of every bank depth for the dot at `centroid`, or `None` if a
/// required crop leaves the frame.
pub fn score_curve(
    frame: &EventFrame,
    sig: &SignatureBank,
    centroid: (f64, f64),
) -> Option<Vec<f64>> {
    let s = sig.crop_size();
    let (h, w) = frame.counts.dim();
    let r = sig.options().search_radius_px as isize;
    let mut crops: HashMap<(isize, isize), Option<Vec<f64>>> = HashMap::new();
    let mut scores = Vec::with_capacity(sig.len());
    for i in 0..sig.len() {
        let mut best = f64::NEG_INFINITY;
        for t in sig.templates_at(i) {
            let bx = (centroid.0 - t.centroid.0).round() as isize;
            let by = (centroid.1 - t.centroid.1).round() as isize;
            for dy in -r..=r {
                for dx in -r..=r {
                    let origin = (bx + dx, by + dy);
                    if origin.0 < 0
                        || origin.1 < 0
                        || origin.0 as usize + s > w
                        || origin.1 as usize + s > h
                    {
                        return None;
                    }
                    let crop = crops.entry(origin).or_insert_with(|| {
                        let (ox, oy) = (origin.0 as usize, origin.1 as usize);
                        let raw: Vec<f64> = (0..s * s)
                            .map(|k| frame.counts[[oy + k / s, ox + k % s]])
                            .collect();
                        normalize(&raw)
                    });
                    let score = match crop {
                        Some(c) => c.iter().zip(&t.values).map(|(a, b)| a * b).sum(),
                        None => 0.0,
                    };
                    best = best.max(score);
                }
            }
        }
        scores.push(best);
    }
    Some(scores)
}

fn decode_one(
    frame: &EventFrame,
    sig: &SignatureBank,
    centroid: (f64, f64),
) -> Option<SparsePoint> {
    let scores = score_curve(frame, sig, centroid)?;
    let (best, depth_index) = pick(&scores);
    let margin = best - runner_up(&scores, depth_index);
    Some(SparsePoint {
        x: centroid.0,
        y: centroid.1,
        depth_m: sig.depths_m()[depth_index],
        confidence: confidence_from_margin(margin),
    })
}

/// Highest score, scanning near to far so ties keep the nearer depth.
fn pick(scores: &[f64]) -> (f64, usize) {
    let mut best = (scores[0], 0);
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > best.0 + TIE_EPS {
            best = (s, i);
        }
    }
    best
}

/// Best competing peak: a local maximum other than `winner` that rises at
/// least [`PEAK_PROMINENCE`] above the saddle joining it to a higher (or
/// equal) score. Shallower bumps count as part of the winner's hill. Falls
/// back to the curve minimum when there is no such peak.
fn runner_up(scores: &[f64], winner: usize) -> f64 {
    let n = scores.len();
    let mut second = f64::NEG_INFINITY;
    for i in 0..n {
        if i == winner {
            continue;
        }
        let left = i == 0 || scores[i] >= scores[i - 1];
        let right = i + 1 == n || scores[i] >= scores[i + 1];
        if left && right && prominence(scores, i) >= PEAK_PROMINENCE {
            second = second.max(scores[i]);
        }
    }
    if second.is_finite() {
        second
    } else {
        scores.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Height of peak `i` above the higher of its two saddles; a side with no
/// higher-or-equal score does not constrain it.
fn prominence(scores: &[f64], i: usize) -> f64 {
    let h = scores[i];
    let saddle = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut low = h;
        for j in range {
            if scores[j] >= h {
                return Some(low);
            }
            low = low.min(scores[j]);
        }
        None
    };
    let l = saddle(&mut (0..i).rev());
    let r = saddle(&mut (i + 1..scores.len()));
    match (l, r) {
        (None, None) => f64::INFINITY,
        (a, b) => {
            h - a
                .unwrap_or(f64::NEG_INFINITY)
                .max(b.unwrap_or(f64::NEG_INFINITY))
        }
    }
}
