use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),

    #[error("unsupported protocol version {0}")]
    BadVersion(u16),

    #[error("unknown message type {0}")]
    UnknownMsgType(u16),

    #[error("malformed payload for {msg}: {reason}")]
    MalformedPayload { msg: &'static str, reason: String },

    #[error("payload length {0} exceeds limit")]
    PayloadTooLarge(u32),

    #[error("negotiation failed: client expected {expected}, server offers {got}")]
    Negotiation { expected: String, got: String },

    #[error("sequence error: expected {expected}, got {got}")]
    Sequence { expected: u64, got: u64 },

    #[error("peer reported protocol error {code}: {message}")]
    Remote { code: u16, message: String },

    #[error("session '{0}' is dead")]
    SessionDead(String),

    #[error("all sessions dead, cannot aggregate")]
    AllSessionsDead,

    #[error("sim error: {0}")]
    Sim(#[from] polysim_sim::SimError),
}
