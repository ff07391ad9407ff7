//! Heterogeneous toy physics backends and the harmonizing router.

pub mod backend;
pub mod descriptor;
pub mod error;
pub mod reference;
pub mod router;
pub mod spec;

pub use backend::{build_backend, Backend, NativeConfig, NativeState};
pub use descriptor::{
    descriptor_a, descriptor_b, descriptor_c, descriptor_d, descriptor_by_name,
    shipped_descriptors, ActionConvention, AngleUnit, BackendDescriptor, ContactModel, Integrator,
};
pub use error::SimError;
pub use reference::ReferenceTrajectory;
pub use router::{
    central_reward, harmonize, translate_action, translate_obs, EnvSlot, ResidualReport, Router,
    RouterConfig, RouterGroupConfig, RewardConfig, StepBatch, UnifiedObservation, UNIFIED_OBS_LEN,
};
pub use spec::{apply_param_dr, DrConfig, PhysicalSpec};
