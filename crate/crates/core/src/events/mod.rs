//! Camera motion over the defocused scene, event generation and event frames.

mod blur;
mod frame;
mod generate;
mod motion;

pub use blur::{blur_image, BlurredImage, LayeredRenderer};
pub use frame::{event_frame, EventFrame};
pub use generate::{
    generate_events, generate_oscillation_events, integrate_and_fire, simulate_event_frame, Event,
    EventVolume,
};
pub use motion::MotionProfile;

/// Default contrast threshold in log-intensity units.
pub const DEFAULT_THRESHOLD: f64 = 0.2;

/// Floor added before taking the log of intensity, `log(I + LOG_EPS)`.
pub const LOG_EPS: f64 = 1e-4;
