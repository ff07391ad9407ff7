//! Toy physics backends for the planar hopper-arm.
//!
//! The task family is a 2-DOF system: one actuated revolute joint (a
//! pendulum arm of mass `m_a` at length `l`) mounted on a base that moves
//! only vertically (height `z` of the base bottom above the ground).
//! Dynamics, all SI/radians internally:
//!
//! ```text
//! I = m_a l^2
//! alpha = (tau - m_a g l sin(theta) + tau_fric) / I
//! F_r   = -m_a l (alpha sin(theta) + omega^2 cos(theta))   (arm reaction)
//! a_z   = -g + (F_contact + F_r) / (m_b + m_a)
//! ```
//!
//! The coupling is deliberately one-way (arm drives base, not vice versa)
//! so the arm is exactly a pendulum whenever friction is off — that gives
//! the tests a closed-form Hamiltonian. Friction is a contact-gated
//! viscous torque on the arm. Native units and state layout are an API
//! skin over these canonical dynamics; the integrator and contact model
//! are where backends genuinely differ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::descriptor::{ActionConvention, BackendDescriptor, ContactModel, Integrator};
use crate::error::SimError;
use crate::reference::ReferenceTrajectory;
use crate::router::harmonize;
use crate::spec::PhysicalSpec;

/// Nm*s of damping torque per unit of friction coefficient while in contact.
const FRICTION_TORQUE_SCALE: f64 = 0.5;

/// Backend-native configuration produced by harmonization. Physics fields
/// stay SI/radian (units are an encoding concern); `action_lo/hi` are in
/// the backend's native action unit.
#[derive(Debug, Clone, PartialEq)]
pub struct NativeConfig {
    pub gravity: f64,
    pub timestep: f64,
    pub base_mass: f64,
    pub arm_mass: f64,
    pub arm_length: f64,
    /// rad
    pub joint_limits: Vec<(f64, f64)>,
    /// The same limits in the backend's native angle unit (what the
    /// engine's config file would show).
    pub native_joint_limits: Vec<(f64, f64)>,
    pub torque_limit: f64,
    pub friction: f64,
    /// Penalty-model parameters; `None` for the impulse backend (recorded
    /// in the residual-mismatch report instead).
    pub contact_stiffness: Option<f64>,
    pub contact_damping: Option<f64>,
    /// SI gains (Nm/rad, Nm*s/rad); unused by torque backends.
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
    /// Gains in native angle units (Nm per native unit of error).
    pub native_kp: Vec<f64>,
    pub native_kd: Vec<f64>,
    /// Native-unit action bounds after intersecting the descriptor's
    /// declared range with spec-derived limits.
    pub action_lo: Vec<f64>,
    pub action_hi: Vec<f64>,
    pub reference: ReferenceTrajectory,
}

/// Backend-ordered native state vector plus bookkeeping flags.
#[derive(Debug, Clone, PartialEq)]
pub struct NativeState {
    /// Layout-permuted `[pos, vel, z, vz, contact]` in native units.
    pub values: Vec<f64>,
    /// True if the last submitted action had to be clipped.
    pub action_clipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CanonState {
    theta: f64,
    omega: f64,
    z: f64,
    vz: f64,
}

pub struct Backend {
    desc: BackendDescriptor,
    cfg: NativeConfig,
    state: CanonState,
    contact: bool,
    step_count: u64,
    clip_events: u64,
    last_clipped: bool,
}

fn penalty_force(cfg: &NativeConfig, z: f64, vz: f64) -> f64 {
    match (cfg.contact_stiffness, cfg.contact_damping) {
        (Some(k), Some(c)) if z < 0.0 => (-k * z - c * vz).max(0.0),
        _ => 0.0,
    }
}

fn in_contact(cfg: &NativeConfig, contact: ContactModel, z: f64) -> bool {
    let _ = cfg;
    match contact {
        ContactModel::PenaltySpringDamper => z < 0.0,
        ContactModel::VelocityImpulse => z <= 0.0,
    }
}

/// Time derivative of `[theta, omega, z, vz]` under torque `tau`.
fn deriv(cfg: &NativeConfig, contact_model: ContactModel, s: CanonState, tau: f64) -> [f64; 4] {
    let inertia = cfg.arm_mass * cfg.arm_length * cfg.arm_length;
    let contact = in_contact(cfg, contact_model, s.z);
    let tau_fric = if contact {
        -cfg.friction * FRICTION_TORQUE_SCALE * s.omega
    } else {
        0.0
    };
    let alpha =
        (tau - cfg.arm_mass * cfg.gravity * cfg.arm_length * s.theta.sin() + tau_fric) / inertia;
    let f_contact = match contact_model {
        ContactModel::PenaltySpringDamper => penalty_force(cfg, s.z, s.vz),
        ContactModel::VelocityImpulse => 0.0,
    };
    let f_react = -cfg.arm_mass
        * cfg.arm_length
        * (alpha * s.theta.sin() + s.omega * s.omega * s.theta.cos());
    let a_z = -cfg.gravity + (f_contact + f_react) / (cfg.base_mass + cfg.arm_mass);
    [s.omega, alpha, s.vz, a_z]
}

fn integrate(
    cfg: &NativeConfig,
    integrator: Integrator,
    contact_model: ContactModel,
    s: CanonState,
    tau: f64,
) -> CanonState {
    let dt = cfg.timestep;
    let mut next = match integrator {
        Integrator::ExplicitEuler => {
            let d = deriv(cfg, contact_model, s, tau);
            CanonState {
                theta: s.theta + dt * d[0],
                omega: s.omega + dt * d[1],
                z: s.z + dt * d[2],
                vz: s.vz + dt * d[3],
            }
        }
        Integrator::SemiImplicitEuler => {
            let d = deriv(cfg, contact_model, s, tau);
            let omega = s.omega + dt * d[1];
            let vz = s.vz + dt * d[3];
            CanonState {
                theta: s.theta + dt * omega,
                omega,
                z: s.z + dt * vz,
                vz,
            }
        }
        Integrator::Rk4 => {
            let eval = |st: CanonState| deriv(cfg, contact_model, st, tau);
            let add = |st: CanonState, d: [f64; 4], h: f64| CanonState {
                theta: st.theta + h * d[0],
                omega: st.omega + h * d[1],
                z: st.z + h * d[2],
                vz: st.vz + h * d[3],
            };
            let k1 = eval(s);
            let k2 = eval(add(s, k1, dt / 2.0));
            let k3 = eval(add(s, k2, dt / 2.0));
            let k4 = eval(add(s, k3, dt));
            CanonState {
                theta: s.theta + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                omega: s.omega + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
                z: s.z + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
                vz: s.vz + dt / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
            }
        }
    };
    if contact_model == ContactModel::VelocityImpulse && next.z < 0.0 {
        next.z = 0.0;
        if next.vz < 0.0 {
            next.vz = 0.0;
        }
    }
    next
}

impl Backend {
    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.desc
    }

    pub fn config(&self) -> &NativeConfig {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.step_count as f64 * self.cfg.timestep
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn clip_events(&self) -> u64 {
        self.clip_events
    }

    fn clamp_joint(&mut self) {
        let (lo, hi) = self.cfg.joint_limits[0];
        if self.state.theta < lo {
            self.state.theta = lo;
            self.state.omega = self.state.omega.max(0.0);
        } else if self.state.theta > hi {
            self.state.theta = hi;
            self.state.omega = self.state.omega.min(0.0);
        }
    }

    fn encode(&self) -> NativeState {
        let u = self.desc.angle_unit.from_radians();
        let canonical = [
            self.state.theta * u,
            self.state.omega * u,
            self.state.z,
            self.state.vz,
            if self.contact { 1.0 } else { 0.0 },
        ];
        let values = self.desc.layout.iter().map(|&i| canonical[i]).collect();
        NativeState {
            values,
            action_clipped: self.last_clipped,
        }
    }

    /// Advance one physics step under a native-unit action.
    pub fn native_step(&mut self, native_action: &[f64]) -> Result<NativeState, SimError> {
        let raw = native_action.first().copied().unwrap_or(0.0);
        let (lo, hi) = (self.cfg.action_lo[0], self.cfg.action_hi[0]);
        let clipped = raw.clamp(lo, hi);
        self.last_clipped = clipped != raw || !raw.is_finite();
        if self.last_clipped {
            self.clip_events += 1;
        }
        let action = if clipped.is_finite() { clipped } else { 0.0 };

        let tau = match self.desc.action_convention {
            ActionConvention::Torque => action.clamp(-self.cfg.torque_limit, self.cfg.torque_limit),
            ActionConvention::NormalizedPositionTarget => {
                // PD actuator at the physics rate, mirroring engine-side
                // actuator models.
                let target_rad = action / self.desc.angle_unit.from_radians();
                let (jlo, jhi) = self.cfg.joint_limits[0];
                let target = target_rad.clamp(jlo, jhi);
                let tau = self.cfg.kp[0] * (target - self.state.theta)
                    - self.cfg.kd[0] * self.state.omega;
                tau.clamp(-self.cfg.torque_limit, self.cfg.torque_limit)
            }
        };

        self.state = integrate(&self.cfg, self.desc.integrator, self.desc.contact, self.state, tau);
        self.clamp_joint();
        self.contact = in_contact(&self.cfg, self.desc.contact, self.state.z);
        self.step_count += 1;

        let bad = !(self.state.theta.is_finite()
            && self.state.omega.is_finite()
            && self.state.z.is_finite()
            && self.state.vz.is_finite());
        if bad {
            return Err(SimError::Diverged {
                backend: self.desc.name.clone(),
                step: self.step_count,
            });
        }
        Ok(self.encode())
    }

    /// Reset near the reference start; noise reproducible under the seed.
    pub fn native_reset(&mut self, seed: u64, init_noise_scale: f64) -> NativeState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = |rng: &mut ChaCha8Rng| (rng.gen::<f64>() * 2.0 - 1.0) * init_noise_scale;
        let (jlo, jhi) = self.cfg.joint_limits[0];
        self.state = CanonState {
            theta: (self.cfg.reference.target(0.0) + noise(&mut rng)).clamp(jlo, jhi),
            omega: noise(&mut rng),
            z: 0.05 + 0.05 * noise(&mut rng).abs(),
            vz: 0.0,
        };
        self.contact = in_contact(&self.cfg, self.desc.contact, self.state.z);
        self.step_count = 0;
        self.clip_events = 0;
        self.last_clipped = false;
        self.encode()
    }
}

/// Build a deterministic backend instance: identical (desc, spec, seed)
/// yields identical trajectories.
pub fn build_backend(
    desc: &BackendDescriptor,
    spec: &PhysicalSpec,
    seed: u64,
) -> Result<Backend, SimError> {
    desc.validate()?;
    spec.validate()?;
    let (cfg, _report) = harmonize(spec, desc)?;
    let mut backend = Backend {
        desc: desc.clone(),
        cfg,
        state: CanonState {
            theta: 0.0,
            omega: 0.0,
            z: 0.0,
            vz: 0.0,
        },
        contact: false,
        step_count: 0,
        clip_events: 0,
        last_clipped: false,
    };
    backend.native_reset(seed, 0.0);
    Ok(backend)
}
