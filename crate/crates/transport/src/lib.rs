//! Training-simulation isolation: SimServer processes behind a binary
//! protocol, a TrainClient that merges rollouts, and a zero-copy loopback
//! transport behind the same session interface.

pub mod client;
pub mod error;
pub mod frame;
pub mod server;
pub mod session;

pub use client::{StragglerBudget, TrainClient, HEARTBEAT_INTERVAL};
pub use error::TransportError;
pub use frame::{Frame, Message, MAGIC, MAX_PAYLOAD, PROTOCOL_VERSION};
pub use server::{serve, SimServer, SimServerConfig};
pub use session::{LoopbackSession, Session, SocketSession, ENCODING};
