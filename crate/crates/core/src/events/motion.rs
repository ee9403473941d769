use serde::{Deserialize, Serialize};

use crate::config::KeyValues;
use crate::error::{Error, Result};

/// Lateral camera translation during one accumulation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    /// `(V_x, V_y)` in meters per second.
    pub velocity_mps: (f64, f64),
    pub accumulation_time_s: f64,
    pub substeps: usize,
}

impl Default for MotionProfile {
    /// 10 cm/s diagonal drift, 50 ms window at 1 ms steps.
    fn default() -> Self {
        Self {
            velocity_mps: (0.08, 0.06),
            accumulation_time_s: 0.05,
            substeps: 50,
        }
    }
}

impl MotionProfile {
    pub fn new(
        velocity_mps: (f64, f64),
        accumulation_time_s: f64,
        substeps: usize,
    ) -> Result<Self> {
        let m = Self {
            velocity_mps,
            accumulation_time_s,
            substeps,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.accumulation_time_s > 0.0) || !self.accumulation_time_s.is_finite() {
            return Err(Error::invalid("motion", "accumulation_time_s must be > 0"));
        }
        if self.substeps < 2 {
            return Err(Error::invalid("motion", "substeps must be >= 2"));
        }
        if !self.velocity_mps.0.is_finite() || !self.velocity_mps.1.is_finite() {
            return Err(Error::invalid("motion", "velocity must be finite"));
        }
        Ok(())
    }

    /// Total camera displacement over the window, `V * dT`.
    pub fn displacement_m(&self) -> (f64, f64) {
        (
            self.velocity_mps.0 * self.accumulation_time_s,
            self.velocity_mps.1 * self.accumulation_time_s,
        )
    }

    /// Camera displacement after substep `k` of `substeps`.
    ///
    /// Computed from the total displacement so that any `(v, dT)` pair with
    /// the same product yields bit-identical positions.
    pub fn displacement_at(&self, k: usize) -> (f64, f64) {
        let (dx, dy) = self.displacement_m();
        let frac = k as f64 / self.substeps as f64;
        (dx * frac, dy * frac)
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.accumulation_time_s * k as f64 / self.substeps as f64
    }

    pub fn reversed(&self) -> Self {
        Self {
            velocity_mps: (-self.velocity_mps.0, -self.velocity_mps.1),
            ..*self
        }
    }

    /// Keys: `velocity_x_mps`, `velocity_y_mps`, `accumulation_time_s`,
    /// `substeps`. Missing keys take the defaults.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        Self::new(
            (
                kv.get_or("velocity_x_mps", d.velocity_mps.0)?,
                kv.get_or("velocity_y_mps", d.velocity_mps.1)?,
            ),
            kv.get_or("accumulation_time_s", d.accumulation_time_s)?,
            kv.get_or("substeps", d.substeps)?,
        )
    }

    pub fn from_config(text: &str) -> Result<Self> {
        Self::from_key_values(&KeyValues::parse(text)?)
    }

    pub fn to_config(&self) -> String {
        format!(
            "velocity_x_mps={}\nvelocity_y_mps={}\naccumulation_time_s={}\nsubsteps={}\n",
            self.velocity_mps.0, self.velocity_mps.1, self.accumulation_time_s, self.substeps
        )
    }
}
