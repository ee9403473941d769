use ndarray::Array2;

use super::EventVolume;
use crate::error::{Error, Result};

/// Polarity-merged event counts per pixel over one accumulation window.
///
/// A frame covers exactly one window, so the per-window average equals the
/// raw count (normalization constant 1).
#[derive(Debug, Clone, PartialEq)]
pub struct EventFrame {
    pub counts: Array2<f64>,
}

impl EventFrame {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            counts: Array2::zeros((height, width)),
        }
    }

    pub fn width(&self) -> usize {
        self.counts.ncols()
    }

    pub fn height(&self) -> usize {
        self.counts.nrows()
    }

    pub fn total(&self) -> f64 {
        self.counts.sum()
    }

    /// Every count multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            counts: &self.counts * factor,
        }
    }
}

/// Accumulates a volume into a frame, merging both polarities.
pub fn event_frame(vol: &EventVolume, width: usize, height: usize) -> Result<EventFrame> {
    let mut frame = EventFrame::zeros(width, height);
    for e in &vol.events {
        let (x, y) = (e.x as usize, e.y as usize);
        if x >= width || y >= height {
            return Err(Error::EventOutOfBounds {
                x,
                y,
                width,
                height,
            });
        }
        frame.counts[[y, x]] += 1.0;
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Event;

    #[test]
    fn empty_volume_gives_zero_frame() {
        let f = event_frame(&EventVolume::default(), 4, 3).unwrap();
        assert_eq!(f.counts.dim(), (3, 4));
        assert_eq!(f.total(), 0.0);
    }

    #[test]
    fn counts_both_polarities() {
        let vol = EventVolume {
            events: vec![
                Event {
                    x: 2,
                    y: 1,
                    t: 0.0,
                    p: 1,
                },
                Event {
                    x: 2,
                    y: 1,
                    t: 0.1,
                    p: -1,
                },
                Event {
                    x: 2,
                    y: 1,
                    t: 0.2,
                    p: 1,
                },
            ],
            duration_s: 1.0,
        };
        let f = event_frame(&vol, 4, 3).unwrap();
        assert_eq!(f.counts[[1, 2]], 3.0);
        assert_eq!(f.total(), 3.0);
    }

    #[test]
    fn out_of_bounds_is_an_error() {
        let vol = EventVolume {
            events: vec![Event {
                x: 4,
                y: 0,
                t: 0.0,
                p: 1,
            }],
            duration_s: 1.0,
        };
        assert!(matches!(
            event_frame(&vol, 4, 3),
            Err(Error::EventOutOfBounds { x: 4, y: 0, .. })
        ));
    }
}
