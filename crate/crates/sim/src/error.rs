use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid physical spec: {0}")]
    InvalidSpec(String),

    #[error("invalid backend descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("unsupported integrator/contact combination: {integrator} with {contact}")]
    UnsupportedCombination { integrator: String, contact: String },

    #[error("backend '{backend}' diverged at step {step}")]
    Diverged { backend: String, step: u64 },

    #[error("domain randomization produced nonphysical value: {0}")]
    NonphysicalDr(String),

    #[error("unknown reference trajectory id '{0}'")]
    UnknownReference(String),

    #[error("router config error: {0}")]
    RouterConfig(String),

    #[error("batch length {got} does not match env count {expected}")]
    BatchLength { got: usize, expected: usize },
}
