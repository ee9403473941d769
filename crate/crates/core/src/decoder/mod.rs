//! Depth recovery from event frames by per-dot signature matching, plus
//! export of simulated training pairs for learned decoders.

mod dataset;
mod decode;
mod densify;
mod detect;
mod signature;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use dataset::{export_training_dataset, Manifest, ManifestRecord, MANIFEST_FILE};
pub use decode::{
    confidence_from_margin, decode_sparse, score_curve, SparseDecode, SparsePoint,
    CONFIDENCE_MIDPOINT, CONFIDENCE_SCALE, PEAK_PROMINENCE,
};
pub use densify::{densify, MEDIAN_WINDOW, MIN_CONFIDENCE};
pub use detect::{detect_dots, detect_dots_with, DetectConfig};
pub use signature::{
    build_signature_bank, build_signature_bank_with, SignatureBank, SignatureOptions, Template,
    CROP_MARGIN_PX,
};

use crate::error::{Error, Result};
use crate::events::EventFrame;

/// Comparison against a ground-truth depth map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    /// Mean |estimate - truth| over decoded dots, truth sampled at the dot.
    pub sparse_l1_m: f64,
    /// Mean |estimate - truth| over all pixels of the dense map.
    pub dense_l1_m: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthEstimate {
    pub dense_map: Array2<f64>,
    pub sparse_points: Vec<SparsePoint>,
    /// Centroids that could not be decoded (crop off the frame).
    pub skipped: Vec<(f64, f64)>,
    pub metrics: Option<DepthMetrics>,
}

impl DepthEstimate {
    /// Fills `metrics` from `truth` (same size as the dense map).
    pub fn evaluate(&mut self, truth: &Array2<f64>) -> Result<DepthMetrics> {
        if truth.dim() != self.dense_map.dim() {
            return Err(Error::invalid(
                "ground truth",
                "size differs from the depth estimate",
            ));
        }
        let (h, w) = truth.dim();
        let mut sparse = 0.0;
        for p in &self.sparse_points {
            let x = (p.x.max(0.0) as usize).min(w - 1);
            let y = (p.y.max(0.0) as usize).min(h - 1);
            sparse += (p.depth_m - truth[[y, x]]).abs();
        }
        let dense = self
            .dense_map
            .iter()
            .zip(truth.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / truth.len() as f64;
        let m = DepthMetrics {
            sparse_l1_m: if self.sparse_points.is_empty() {
                f64::NAN
            } else {
                sparse / self.sparse_points.len() as f64
            },
            dense_l1_m: dense,
            points: self.sparse_points.len(),
        };
        self.metrics = Some(m);
        Ok(m)
    }

    /// Sparse points as CSV (`x,y,depth_m,confidence`).
    pub fn sparse_csv(&self) -> String {
        let mut out = String::from("x,y,depth_m,confidence\n");
        for p in &self.sparse_points {
            out.push_str(&format!(
                "{:.6},{:.6},{:.6},{:.6}\n",
                p.x, p.y, p.depth_m, p.confidence
            ));
        }
        out
    }
}

/// Detect, match and densify in one call.
pub fn decode_frame(frame: &EventFrame, sig: &SignatureBank) -> Result<DepthEstimate> {
    let centroids = detect_dots_with(frame, &sig.detect_config());
    let sparse = decode_sparse(frame, sig, &centroids)?;
    let dense_map = densify(&sparse.points, frame.width(), frame.height())?;
    Ok(DepthEstimate {
        dense_map,
        sparse_points: sparse.points,
        skipped: sparse.skipped,
        metrics: None,
    })
}
