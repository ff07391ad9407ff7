use thiserror::Error;

/// Errors from the math core.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid metric space: {0}")]
    InvalidMetric(String),
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("section violation: {0}")]
    SectionViolation(String),
    #[error("weights not on the probability simplex: {0}")]
    SimplexViolation(String),
    #[error("policy enumeration needs {required} policies, cap is {cap}")]
    EnumerationCapExceeded { required: u128, cap: u128 },
    #[error("empty policy class")]
    EmptyPolicyClass,
    #[error("singular linear system in policy evaluation")]
    SingularSystem,
    #[error("transport problem infeasible: {0}")]
    Infeasible(String),
    #[error("solver budget exhausted after {iterations} iterations (best objective {best})")]
    BudgetExhausted { iterations: usize, best: f64 },
    #[error("serialization: {0}")]
    Serialize(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
