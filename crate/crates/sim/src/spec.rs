//! Unified scene/robot/physics description consumed by the router.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// The single source of truth for the physical scene. The router harmonizes
/// this onto each backend's native configuration; backends never read it
/// directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSpec {
    /// m/s^2, positive magnitude (acts downward).
    pub gravity: f64,
    /// s
    pub timestep: f64,
    /// kg: [base mass, arm mass]
    pub link_masses: Vec<f64>,
    /// m: [arm length]
    pub link_lengths: Vec<f64>,
    /// rad, per joint
    pub joint_limits: Vec<(f64, f64)>,
    /// N*m
    pub torque_limit: f64,
    /// dimensionless
    pub ground_friction: f64,
    /// N/m
    pub contact_stiffness: f64,
    /// N*s/m
    pub contact_damping: f64,
    /// per joint
    pub kp: Vec<f64>,
    /// per joint
    pub kd: Vec<f64>,
    pub reference_id: String,
}

impl PhysicalSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.timestep > 0.0) {
            return Err(SimError::InvalidSpec(format!(
                "timestep must be positive, got {}",
                self.timestep
            )));
        }
        if self.link_masses.is_empty() || self.link_masses.iter().any(|&m| !(m > 0.0)) {
            return Err(SimError::InvalidSpec("all link masses must be positive".into()));
        }
        if self.link_lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(SimError::InvalidSpec("all link lengths must be positive".into()));
        }
        for &(lo, hi) in &self.joint_limits {
            if !(lo < hi) {
                return Err(SimError::InvalidSpec(format!(
                    "joint limits not well-ordered: ({lo}, {hi})"
                )));
            }
        }
        if self.ground_friction < 0.0 {
            return Err(SimError::InvalidSpec("friction must be non-negative".into()));
        }
        if !(self.torque_limit > 0.0) {
            return Err(SimError::InvalidSpec("torque limit must be positive".into()));
        }
        if self.contact_stiffness < 0.0 || self.contact_damping < 0.0 {
            return Err(SimError::InvalidSpec("contact parameters must be non-negative".into()));
        }
        let nj = self.joint_limits.len();
        if self.kp.len() != nj || self.kd.len() != nj {
            return Err(SimError::InvalidSpec("kp/kd length must match joint count".into()));
        }
        Ok(())
    }

    pub fn n_joints(&self) -> usize {
        self.joint_limits.len()
    }

    pub fn base_mass(&self) -> f64 {
        self.link_masses[0]
    }

    pub fn arm_mass(&self) -> f64 {
        self.link_masses.get(1).copied().unwrap_or(0.0)
    }

    pub fn arm_length(&self) -> f64 {
        self.link_lengths.first().copied().unwrap_or(1.0)
    }
}

impl Default for PhysicalSpec {
    fn default() -> Self {
        PhysicalSpec {
            gravity: 9.81,
            timestep: 0.02,
            link_masses: vec![2.0, 0.5],
            link_lengths: vec![0.4],
            joint_limits: vec![(-2.0, 2.0)],
            torque_limit: 6.0,
            ground_friction: 0.4,
            contact_stiffness: 800.0,
            contact_damping: 40.0,
            kp: vec![18.0],
            kd: vec![1.2],
            reference_id: "sine-medium".into(),
        }
    }
}

/// Per-field multiplicative ranges for the parameter-level DR baseline.
/// A range (lo, hi) draws a factor uniformly from [lo, hi]; zero-width
/// ranges leave the field unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrConfig {
    pub gravity: (f64, f64),
    pub masses: (f64, f64),
    pub friction: (f64, f64),
    pub contact_stiffness: (f64, f64),
    pub contact_damping: (f64, f64),
    pub gains: (f64, f64),
}

impl DrConfig {
    pub fn identity() -> Self {
        DrConfig {
            gravity: (1.0, 1.0),
            masses: (1.0, 1.0),
            friction: (1.0, 1.0),
            contact_stiffness: (1.0, 1.0),
            contact_damping: (1.0, 1.0),
            gains: (1.0, 1.0),
        }
    }

    /// Moderate default used by the DR baseline experiments.
    pub fn baseline() -> Self {
        DrConfig {
            gravity: (0.9, 1.1),
            masses: (0.8, 1.2),
            friction: (0.7, 1.3),
            contact_stiffness: (0.6, 1.4),
            contact_damping: (0.6, 1.4),
            gains: (0.85, 1.15),
        }
    }
}

fn draw(rng: &mut impl Rng, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.gen_range(range.0..=range.1)
    }
}

pub fn apply_param_dr(
    spec: &PhysicalSpec,
    dr: &DrConfig,
    rng: &mut impl Rng,
) -> Result<PhysicalSpec, SimError> {
    let mut out = spec.clone();
    out.gravity *= draw(rng, dr.gravity);
    let mass_factor = draw(rng, dr.masses);
    for m in &mut out.link_masses {
        *m *= mass_factor;
        if !(*m > 0.0) {
            return Err(SimError::NonphysicalDr(format!("mass became {m}")));
        }
    }
    out.ground_friction *= draw(rng, dr.friction);
    out.contact_stiffness *= draw(rng, dr.contact_stiffness);
    out.contact_damping *= draw(rng, dr.contact_damping);
    let gain_factor = draw(rng, dr.gains);
    for g in out.kp.iter_mut().chain(out.kd.iter_mut()) {
        *g *= gain_factor;
    }
    out.validate()?;
    Ok(out)
}
