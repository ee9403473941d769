//! Dark scenes lit only by a projected dot pattern, and rendering of the
//! all-in-focus latent intensity with per-pixel depth.

mod pattern;
mod render;
#[allow(clippy::module_inception)]
mod scene;

pub use pattern::{Dot, DotLayout, DotPattern, DEFAULT_DOT_COUNT, DEFAULT_DOT_RADIUS_PX};
pub use render::{render_latent, LatentImage, RenderedDot};
pub use scene::{Layer, Rect, Scene};
