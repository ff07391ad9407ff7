//! Synthetic reference trajectories: the desk-scale stand-in for the
//! motion dataset. Each id names a sinusoidal joint target with an
//! amplitude/frequency tier.

use serde::{Deserialize, Serialize};

use crate::error::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrajectory {
    /// rad
    pub amplitude: f64,
    /// Hz
    pub frequency: f64,
    /// rad
    pub phase: f64,
}

impl ReferenceTrajectory {
    pub fn by_id(id: &str) -> Result<Self, SimError> {
        let (amplitude, frequency) = match id {
            "sine-easy" => (0.4, 0.25),
            "sine-medium" => (0.7, 0.5),
            "sine-hard" => (1.1, 0.8),
            _ => return Err(SimError::UnknownReference(id.into())),
        };
        Ok(ReferenceTrajectory {
            amplitude,
            frequency,
            phase: 0.0,
        })
    }

    /// Target joint angle in radians at time t (seconds).
    pub fn target(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * std::f64::consts::PI * self.frequency * t + self.phase).sin()
    }

    /// Phase in [0, 1), the normalized position within one period.
    pub fn phase_at(&self, t: f64) -> f64 {
        let p = (self.frequency * t + self.phase / (2.0 * std::f64::consts::PI)).fract();
        if p < 0.0 {
            p + 1.0
        } else {
            p
        }
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }
}
