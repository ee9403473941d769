//! Monocular depth sensing in the dark with a coded-aperture event camera and
//! a projected dot pattern.
//!
//! The pipeline is split into stages that can be used on their own:
//!
//! 1. [`optics`]: thin-lens blur geometry, aperture masks, depth-dependent
//!    PSFs and blur sensitivity.
//! 2. [`scene`]: layered planar scenes lit by a dot projector, rendered to an
//!    all-in-focus latent image with ground-truth depth.
//! 3. [`events`]: per-layer defocus, lateral camera motion and an
//!    integrate-and-fire contrast model producing event volumes and frames.
//! 4. [`decoder`]: template matching of per-dot event signatures against a
//!    bank simulated at known depths, densification, and training-set export.
//! 5. [`benchmark`]: aperture x focus-distance sweeps, sensitivity curves,
//!    CSV and SVG output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod config;
pub mod decoder;
pub mod error;
pub mod events;
pub mod formats;
pub mod io;
pub mod optics;
pub mod scene;

pub use error::{Error, Result};
