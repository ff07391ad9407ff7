use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("transport: {0}")]
    Transport(#[from] polysim_transport::TransportError),

    #[error("sim: {0}")]
    Sim(#[from] polysim_sim::SimError),

    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serialize(String),

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}
