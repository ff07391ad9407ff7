//! Backend descriptors: the fixed engine meta-parameters.
//!
//! The paper-side "residual mismatches are recorded as fixed engine
//! meta-parameters" interpretation is realized here: every field of a
//! descriptor IS such a meta-parameter, declared up front and never
//! silently changed by harmonization.

use serde::{Deserialize, Serialize};

use crate::error::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    ExplicitEuler,
    SemiImplicitEuler,
    Rk4,
}

impl Integrator {
    pub fn name(self) -> &'static str {
        match self {
            Integrator::ExplicitEuler => "explicit-euler",
            Integrator::SemiImplicitEuler => "semi-implicit-euler",
            Integrator::Rk4 => "rk4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContactModel {
    PenaltySpringDamper,
    VelocityImpulse,
}

impl ContactModel {
    pub fn name(self) -> &'static str {
        match self {
            ContactModel::PenaltySpringDamper => "penalty-spring-damper",
            ContactModel::VelocityImpulse => "velocity-impulse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleUnit {
    Radian,
    Degree,
}

impl AngleUnit {
    /// Factor converting radians into this unit.
    pub fn from_radians(self) -> f64 {
        match self {
            AngleUnit::Radian => 1.0,
            AngleUnit::Degree => 180.0 / std::f64::consts::PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionConvention {
    Torque,
    NormalizedPositionTarget,
}

/// Canonical native-state field order is
/// `[joint pos, joint vel, base height, base vel, contact flag]` per joint
/// block; the layout permutation says where each canonical field lives in
/// the backend's native vector: `native[i] = canonical[layout[i]]`.
pub const NATIVE_FIELDS_PER_JOINT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub integrator: Integrator,
    pub contact: ContactModel,
    pub angle_unit: AngleUnit,
    pub action_convention: ActionConvention,
    /// Permutation over the canonical field indices.
    pub layout: Vec<usize>,
    /// Per-joint native action bounds (native unit: N*m for torque
    /// backends, native angle unit for target backends).
    pub action_range: Vec<(f64, f64)>,
}

impl BackendDescriptor {
    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.layout.len();
        let mut seen = vec![false; n];
        for &i in &self.layout {
            if i >= n || seen[i] {
                return Err(SimError::InvalidDescriptor(format!(
                    "layout {:?} is not a permutation",
                    self.layout
                )));
            }
            seen[i] = true;
        }
        if n % NATIVE_FIELDS_PER_JOINT != 0 || n == 0 {
            return Err(SimError::InvalidDescriptor(format!(
                "layout length {n} is not a multiple of {NATIVE_FIELDS_PER_JOINT}"
            )));
        }
        for &(lo, hi) in &self.action_range {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(SimError::InvalidDescriptor(format!(
                    "action range ({lo}, {hi}) must be finite and ordered"
                )));
            }
        }
        if self.action_range.is_empty() {
            return Err(SimError::InvalidDescriptor("empty action range".into()));
        }
        // Compatibility table (see docs/FORMATS.md): RK4 integrates a smooth
        // vector field; the impulse projection is not one, so the pair is
        // rejected rather than approximated.
        if self.integrator == Integrator::Rk4 && self.contact == ContactModel::VelocityImpulse {
            return Err(SimError::UnsupportedCombination {
                integrator: self.integrator.name().into(),
                contact: self.contact.name().into(),
            });
        }
        Ok(())
    }

    pub fn n_joints(&self) -> usize {
        self.layout.len() / NATIVE_FIELDS_PER_JOINT
    }
}

const DEG: f64 = 180.0 / std::f64::consts::PI;

/// Descriptor A: the IsaacGym-analogue. Explicit Euler, penalty contact,
/// radian-native torque control, identity layout.
pub fn descriptor_a() -> BackendDescriptor {
    BackendDescriptor {
        name: "A".into(),
        integrator: Integrator::ExplicitEuler,
        contact: ContactModel::PenaltySpringDamper,
        angle_unit: AngleUnit::Radian,
        action_convention: ActionConvention::Torque,
        layout: vec![0, 1, 2, 3, 4],
        action_range: vec![(-6.0, 6.0)],
    }
}

/// Descriptor B: the IsaacSim-analogue. Semi-implicit Euler, penalty
/// contact, degree-native position targets, scrambled layout.
pub fn descriptor_b() -> BackendDescriptor {
    BackendDescriptor {
        name: "B".into(),
        integrator: Integrator::SemiImplicitEuler,
        contact: ContactModel::PenaltySpringDamper,
        angle_unit: AngleUnit::Degree,
        action_convention: ActionConvention::NormalizedPositionTarget,
        layout: vec![2, 3, 0, 1, 4],
        action_range: vec![(-2.0 * DEG, 2.0 * DEG)],
    }
}

/// Descriptor C: the Genesis-analogue. RK4, penalty contact, radian-native
/// position targets.
pub fn descriptor_c() -> BackendDescriptor {
    BackendDescriptor {
        name: "C".into(),
        integrator: Integrator::Rk4,
        contact: ContactModel::PenaltySpringDamper,
        angle_unit: AngleUnit::Radian,
        action_convention: ActionConvention::NormalizedPositionTarget,
        layout: vec![4, 2, 0, 3, 1],
        action_range: vec![(-2.0, 2.0)],
    }
}

/// Descriptor D: the MuJoCo-analogue, reserved as the default held-out
/// evaluation backend. Semi-implicit Euler, velocity-impulse contact,
/// radian-native torque control.
pub fn descriptor_d() -> BackendDescriptor {
    BackendDescriptor {
        name: "D".into(),
        integrator: Integrator::SemiImplicitEuler,
        contact: ContactModel::VelocityImpulse,
        angle_unit: AngleUnit::Radian,
        action_convention: ActionConvention::Torque,
        layout: vec![1, 0, 3, 2, 4],
        action_range: vec![(-6.0, 6.0)],
    }
}

pub fn shipped_descriptors() -> Vec<BackendDescriptor> {
    vec![descriptor_a(), descriptor_b(), descriptor_c(), descriptor_d()]
}

pub fn descriptor_by_name(name: &str) -> Result<BackendDescriptor, SimError> {
    shipped_descriptors()
        .into_iter()
        .find(|d| d.name == name)
        .ok_or_else(|| SimError::InvalidDescriptor(format!("unknown backend '{name}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_descriptors_valid() {
        for d in shipped_descriptors() {
            d.validate().unwrap();
            assert_eq!(d.n_joints(), 1);
        }
    }

    #[test]
    fn rk4_with_impulse_rejected() {
        let mut d = descriptor_c();
        d.contact = ContactModel::VelocityImpulse;
        assert!(matches!(
            d.validate(),
            Err(SimError::UnsupportedCombination { .. })
        ));
    }

    #[test]
    fn non_permutation_layout_rejected() {
        let mut d = descriptor_a();
        d.layout = vec![0, 0, 2, 3, 4];
        assert!(d.validate().is_err());
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(descriptor_by_name("D").unwrap(), descriptor_d());
        assert!(descriptor_by_name("Z").is_err());
    }
}
