//! On-disk formats: PGM masks and kernels, EVF1 event frames, 16-bit PNG
//! depth maps.

pub mod depth_png;
pub mod evf;
pub mod pgm;
