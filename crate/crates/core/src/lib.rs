//! Finite MDPs on metric state spaces, exact optimal transport, and the
//! mixture-kernel sim-to-real gap machinery built on top of them.
//!
//! All numeric code is generic over the scalar type through [`scalar::Real`];
//! the aliases at the crate root fix `f64`, which is what the verification
//! batches and the rest of the workspace use.

pub mod error;
pub mod kernel;
pub mod mdp;
pub mod scalar;
pub mod serialize;
pub mod theory;
pub mod wasserstein;

pub use error::CoreError;
pub use scalar::Real;

/// `f64` concrete aliases for the generic core types.
pub type MetricSpace = mdp::MetricSpaceT<f64>;
pub type FiniteMdp = mdp::FiniteMdpT<f64>;
pub type Policy = mdp::PolicyT<f64>;
pub type PolicyClass = mdp::PolicyClassT<f64>;
pub type Kernel = kernel::KernelT<f64>;
pub type LiftedKernel = kernel::LiftedKernelT<f64>;
pub type MixtureKernel = kernel::MixtureKernelT<f64>;
pub type HullSolution = kernel::HullSolutionT<f64>;
pub type GapReport = theory::GapReportT<f64>;
