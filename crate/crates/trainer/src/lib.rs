//! Policy training for the polysim workspace: a small tanh MLP policy
//! with a Gaussian head, clipped-surrogate updates, rollout collection
//! over a `TrainClient`, tracking-metric evaluation, and the
//! single/sequential/parallel training regimes.

pub mod checkpoint;
pub mod error;
pub mod metrics;
pub mod net;
pub mod ppo;
pub mod rollout;
pub mod train;

pub use checkpoint::CheckpointPayload;
pub use error::TrainerError;
pub use metrics::{evaluate, TrackingMetrics, FAILURE_FRACTION};
pub use net::{gaussian_log_prob, Adam, NetShape, PolicyNet};
pub use ppo::{compute_gae, update, Advantages, LossStats, PpoHyper, TrajectoryBuffer};
pub use rollout::{rollout, sample_standard_normal};
pub use train::{loopback_client, train, train_from, IterationLog, RunRegime, TrainOutcome, TrainerConfig};
