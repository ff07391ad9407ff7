//! Client-side session handles: one interface over two transports.

use std::io::{BufReader, BufWriter};
use std::net::TcpStream;

use polysim_sim::{Router, StepBatch};

use crate::error::TransportError;
use crate::frame::{Frame, Message};

/// One backend's worth of envs, either in-process (loopback) or behind a
/// socket. Single in-flight operation per session.
pub trait Session: Send {
    fn name(&self) -> &str;
    fn env_count(&self) -> usize;
    fn obs_width(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Result<StepBatch, TransportError>;
    fn step(&mut self, actions: &[f64]) -> Result<StepBatch, TransportError>;
    /// Keepalive while idle; a no-op for loopback.
    fn heartbeat(&mut self) -> Result<(), TransportError>;
    fn shutdown(&mut self) -> Result<(), TransportError>;
    /// In-process sessions are stepped inline by the client (no worker
    /// thread, no channel hops) — the zero-copy path.
    fn is_local(&self) -> bool {
        false
    }
}

/// Zero-copy in-process transport: the router's batches are handed over
/// by move, bypassing the byte protocol entirely.
pub struct LoopbackSession {
    name: String,
    router: Router,
}

impl LoopbackSession {
    pub fn new(name: impl Into<String>, router: Router) -> Self {
        LoopbackSession {
            name: name.into(),
            router,
        }
    }
}

impl Session for LoopbackSession {
    fn name(&self) -> &str {
        &self.name
    }

    fn env_count(&self) -> usize {
        self.router.n_envs()
    }

    fn obs_width(&self) -> usize {
        self.router.obs_width()
    }

    fn reset(&mut self, seed: u64) -> Result<StepBatch, TransportError> {
        Ok(self.router.reset(seed))
    }

    fn step(&mut self, actions: &[f64]) -> Result<StepBatch, TransportError> {
        Ok(self.router.vector_step(actions)?)
    }

    fn heartbeat(&mut self) -> Result<(), TransportError> {
        Ok(())
    }

    fn shutdown(&mut self) -> Result<(), TransportError> {
        Ok(())
    }

    fn is_local(&self) -> bool {
        true
    }
}

/// Socket transport speaking the PSIM framing.
pub struct SocketSession {
    name: String,
    env_count: usize,
    obs_width: usize,
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    seq: u64,
    nonce: u64,
}

pub const ENCODING: &str = "le-f64-envmajor";

impl SocketSession {
    /// Connect and negotiate; a server offering a different backend than
    /// expected is a negotiation error naming both sides.
    pub fn connect(addr: &str, expected_backend: &str) -> Result<SocketSession, TransportError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        // Bounded reads so a wedged server cannot hang a worker forever.
        stream.set_read_timeout(Some(std::time::Duration::from_secs(10)))?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        Message::Hello {
            encoding: ENCODING.into(),
            backend: expected_backend.into(),
            env_count: 0,
            obs_width: 0,
        }
        .encode()
        .write_to(&mut writer)?;
        let reply = Message::decode(&Frame::read_from(&mut reader)?)?;
        match reply {
            Message::HelloAck {
                backend,
                env_count,
                obs_width,
            } => {
                if backend != expected_backend {
                    return Err(TransportError::Negotiation {
                        expected: expected_backend.into(),
                        got: backend,
                    });
                }
                Ok(SocketSession {
                    name: backend,
                    env_count: env_count as usize,
                    obs_width: obs_width as usize,
                    reader,
                    writer,
                    seq: 0,
                    nonce: 0,
                })
            }
            Message::Error { code, message } => Err(TransportError::Remote { code, message }),
            other => Err(TransportError::MalformedPayload {
                msg: "HELLO_ACK",
                reason: format!("unexpected reply {:?}", other.msg_type()),
            }),
        }
    }

    fn roundtrip(&mut self, msg: Message) -> Result<Message, TransportError> {
        msg.encode().write_to(&mut self.writer)?;
        loop {
            let reply = Message::decode(&Frame::read_from(&mut self.reader)?)?;
            match reply {
                // Heartbeat acks may interleave with step replies.
                Message::HeartbeatAck { .. } => continue,
                Message::Error { code, message } => {
                    return Err(TransportError::Remote { code, message })
                }
                other => return Ok(other),
            }
        }
    }
}

impl Session for SocketSession {
    fn name(&self) -> &str {
        &self.name
    }

    fn env_count(&self) -> usize {
        self.env_count
    }

    fn obs_width(&self) -> usize {
        self.obs_width
    }

    fn reset(&mut self, seed: u64) -> Result<StepBatch, TransportError> {
        self.seq += 1;
        let seq = self.seq;
        match self.roundtrip(Message::Reset { seq, seed })? {
            Message::ResetAck { seq: s, batch } if s == seq => Ok(batch),
            Message::ResetAck { seq: s, .. } => Err(TransportError::Sequence {
                expected: seq,
                got: s,
            }),
            other => Err(TransportError::MalformedPayload {
                msg: "RESET_ACK",
                reason: format!("unexpected reply {:?}", other.msg_type()),
            }),
        }
    }

    fn step(&mut self, actions: &[f64]) -> Result<StepBatch, TransportError> {
        self.seq += 1;
        let seq = self.seq;
        match self.roundtrip(Message::Step {
            seq,
            actions: actions.to_vec(),
        })? {
            Message::StepAck { seq: s, batch } if s == seq => Ok(batch),
            Message::StepAck { seq: s, .. } => Err(TransportError::Sequence {
                expected: seq,
                got: s,
            }),
            other => Err(TransportError::MalformedPayload {
                msg: "STEP_ACK",
                reason: format!("unexpected reply {:?}", other.msg_type()),
            }),
        }
    }

    fn heartbeat(&mut self) -> Result<(), TransportError> {
        self.nonce += 1;
        Message::Heartbeat { nonce: self.nonce }
            .encode()
            .write_to(&mut self.writer)?;
        Ok(())
    }

    fn shutdown(&mut self) -> Result<(), TransportError> {
        Message::Shutdown.encode().write_to(&mut self.writer)?;
        Ok(())
    }
}
