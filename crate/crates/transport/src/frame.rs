//! Wire format: framing and message payload codecs.
//!
//! Byte-exact layout is documented in docs/PROTOCOL.md. Everything is
//! little-endian; floats are IEEE-754 binary64, env-major.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use polysim_sim::StepBatch;

use crate::error::TransportError;

pub const MAGIC: [u8; 4] = *b"PSIM";
pub const PROTOCOL_VERSION: u16 = 1;
/// Hard cap on payload size; anything larger is treated as malformed.
pub const MAX_PAYLOAD: u32 = 64 * 1024 * 1024;

pub const MSG_HELLO: u16 = 0x0001;
pub const MSG_HELLO_ACK: u16 = 0x0002;
pub const MSG_RESET: u16 = 0x0003;
pub const MSG_RESET_ACK: u16 = 0x0004;
pub const MSG_STEP: u16 = 0x0005;
pub const MSG_STEP_ACK: u16 = 0x0006;
pub const MSG_HEARTBEAT: u16 = 0x0007;
pub const MSG_HEARTBEAT_ACK: u16 = 0x0008;
pub const MSG_SHUTDOWN: u16 = 0x0009;
pub const MSG_ERROR: u16 = 0x000A;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub version: u16,
    pub msg_type: u16,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), TransportError> {
        w.write_all(&MAGIC)?;
        w.write_all(&self.version.to_le_bytes())?;
        w.write_all(&self.msg_type.to_le_bytes())?;
        w.write_all(&(self.payload.len() as u32).to_le_bytes())?;
        w.write_all(&self.payload)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Frame, TransportError> {
        let mut head = [0u8; 12];
        r.read_exact(&mut head)?;
        let magic: [u8; 4] = head[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(TransportError::BadMagic(magic));
        }
        let version = u16::from_le_bytes(head[4..6].try_into().unwrap());
        let msg_type = u16::from_le_bytes(head[6..8].try_into().unwrap());
        let len = u32::from_le_bytes(head[8..12].try_into().unwrap());
        if len > MAX_PAYLOAD {
            return Err(TransportError::PayloadTooLarge(len));
        }
        let mut payload = vec![0u8; len as usize];
        r.read_exact(&mut payload)?;
        Ok(Frame {
            version,
            msg_type,
            payload,
        })
    }
}

/// Typed protocol messages; `Frame <-> Message` is the codec under test.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello {
        /// Payload numeric encoding declaration; must be "le-f64-envmajor".
        encoding: String,
        backend: String,
        env_count: u32,
        obs_width: u32,
    },
    HelloAck {
        backend: String,
        env_count: u32,
        obs_width: u32,
    },
    Reset {
        seq: u64,
        seed: u64,
    },
    ResetAck {
        seq: u64,
        batch: StepBatch,
    },
    Step {
        seq: u64,
        actions: Vec<f64>,
    },
    StepAck {
        seq: u64,
        batch: StepBatch,
    },
    Heartbeat {
        nonce: u64,
    },
    HeartbeatAck {
        nonce: u64,
    },
    Shutdown,
    Error {
        code: u16,
        message: String,
    },
}

// -- primitive codecs ---------------------------------------------------

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    msg: &'static str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TransportError> {
        if self.pos + n > self.buf.len() {
            return Err(TransportError::MalformedPayload {
                msg: self.msg,
                reason: format!("truncated at byte {}", self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, TransportError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, TransportError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, TransportError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, TransportError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, TransportError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| TransportError::MalformedPayload {
            msg: self.msg,
            reason: "invalid utf-8 string".into(),
        })
    }

    fn f64_vec(&mut self) -> Result<Vec<f64>, TransportError> {
        let n = self.u32()? as usize;
        let mut out = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    fn bitset(&mut self, n: usize) -> Result<Vec<bool>, TransportError> {
        let bytes = self.take(n.div_ceil(8))?;
        Ok((0..n).map(|i| bytes[i / 8] & (1 << (i % 8)) != 0).collect())
    }

    fn done(&self) -> Result<(), TransportError> {
        if self.pos != self.buf.len() {
            return Err(TransportError::MalformedPayload {
                msg: self.msg,
                reason: format!("{} trailing bytes", self.buf.len() - self.pos),
            });
        }
        Ok(())
    }
}

fn put_string(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn put_f64_vec(buf: &mut Vec<u8>, v: &[f64]) {
    buf.extend_from_slice(&(v.len() as u32).to_le_bytes());
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

fn put_bitset(buf: &mut Vec<u8>, bits: &[bool]) {
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    buf.extend_from_slice(&bytes);
}

fn put_batch(buf: &mut Vec<u8>, b: &StepBatch) {
    buf.extend_from_slice(&(b.n_envs() as u32).to_le_bytes());
    buf.extend_from_slice(&(b.obs_width as u32).to_le_bytes());
    for x in &b.obs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    for x in &b.rewards {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    put_bitset(buf, &b.done);
    put_bitset(buf, &b.mask);
    buf.extend_from_slice(&(b.info.len() as u32).to_le_bytes());
    for (k, v) in &b.info {
        put_string(buf, k);
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn get_batch(c: &mut Cursor) -> Result<StepBatch, TransportError> {
    let n_envs = c.u32()? as usize;
    let obs_width = c.u32()? as usize;
    if n_envs.saturating_mul(obs_width) > (MAX_PAYLOAD as usize) / 8 {
        return Err(TransportError::MalformedPayload {
            msg: c.msg,
            reason: format!("implausible batch shape {n_envs}x{obs_width}"),
        });
    }
    let mut obs = Vec::with_capacity(n_envs * obs_width);
    for _ in 0..n_envs * obs_width {
        obs.push(c.f64()?);
    }
    let mut rewards = Vec::with_capacity(n_envs);
    for _ in 0..n_envs {
        rewards.push(c.f64()?);
    }
    let done = c.bitset(n_envs)?;
    let mask = c.bitset(n_envs)?;
    let n_info = c.u32()? as usize;
    let mut info = BTreeMap::new();
    for _ in 0..n_info {
        let k = c.string()?;
        let v = c.f64()?;
        info.insert(k, v);
    }
    Ok(StepBatch {
        obs,
        obs_width,
        rewards,
        done,
        mask,
        info,
    })
}

impl Message {
    pub fn msg_type(&self) -> u16 {
        match self {
            Message::Hello { .. } => MSG_HELLO,
            Message::HelloAck { .. } => MSG_HELLO_ACK,
            Message::Reset { .. } => MSG_RESET,
            Message::ResetAck { .. } => MSG_RESET_ACK,
            Message::Step { .. } => MSG_STEP,
            Message::StepAck { .. } => MSG_STEP_ACK,
            Message::Heartbeat { .. } => MSG_HEARTBEAT,
            Message::HeartbeatAck { .. } => MSG_HEARTBEAT_ACK,
            Message::Shutdown => MSG_SHUTDOWN,
            Message::Error { .. } => MSG_ERROR,
        }
    }

    pub fn encode(&self) -> Frame {
        let mut p = Vec::new();
        match self {
            Message::Hello {
                encoding,
                backend,
                env_count,
                obs_width,
            } => {
                put_string(&mut p, encoding);
                put_string(&mut p, backend);
                p.extend_from_slice(&env_count.to_le_bytes());
                p.extend_from_slice(&obs_width.to_le_bytes());
            }
            Message::HelloAck {
                backend,
                env_count,
                obs_width,
            } => {
                put_string(&mut p, backend);
                p.extend_from_slice(&env_count.to_le_bytes());
                p.extend_from_slice(&obs_width.to_le_bytes());
            }
            Message::Reset { seq, seed } => {
                p.extend_from_slice(&seq.to_le_bytes());
                p.extend_from_slice(&seed.to_le_bytes());
            }
            Message::ResetAck { seq, batch } | Message::StepAck { seq, batch } => {
                p.extend_from_slice(&seq.to_le_bytes());
                put_batch(&mut p, batch);
            }
            Message::Step { seq, actions } => {
                p.extend_from_slice(&seq.to_le_bytes());
                put_f64_vec(&mut p, actions);
            }
            Message::Heartbeat { nonce } | Message::HeartbeatAck { nonce } => {
                p.extend_from_slice(&nonce.to_le_bytes());
            }
            Message::Shutdown => {}
            Message::Error { code, message } => {
                p.extend_from_slice(&code.to_le_bytes());
                put_string(&mut p, message);
            }
        }
        Frame {
            version: PROTOCOL_VERSION,
            msg_type: self.msg_type(),
            payload: p,
        }
    }

    pub fn decode(frame: &Frame) -> Result<Message, TransportError> {
        if frame.version != PROTOCOL_VERSION {
            return Err(TransportError::BadVersion(frame.version));
        }
        let name = match frame.msg_type {
            MSG_HELLO => "HELLO",
            MSG_HELLO_ACK => "HELLO_ACK",
            MSG_RESET => "RESET",
            MSG_RESET_ACK => "RESET_ACK",
            MSG_STEP => "STEP",
            MSG_STEP_ACK => "STEP_ACK",
            MSG_HEARTBEAT => "HEARTBEAT",
            MSG_HEARTBEAT_ACK => "HEARTBEAT_ACK",
            MSG_SHUTDOWN => "SHUTDOWN",
            MSG_ERROR => "ERROR",
            t => return Err(TransportError::UnknownMsgType(t)),
        };
        let mut c = Cursor {
            buf: &frame.payload,
            pos: 0,
            msg: name,
        };
        let msg = match frame.msg_type {
            MSG_HELLO => Message::Hello {
                encoding: c.string()?,
                backend: c.string()?,
                env_count: c.u32()?,
                obs_width: c.u32()?,
            },
            MSG_HELLO_ACK => Message::HelloAck {
                backend: c.string()?,
                env_count: c.u32()?,
                obs_width: c.u32()?,
            },
            MSG_RESET => Message::Reset {
                seq: c.u64()?,
                seed: c.u64()?,
            },
            MSG_RESET_ACK => Message::ResetAck {
                seq: c.u64()?,
                batch: get_batch(&mut c)?,
            },
            MSG_STEP => Message::Step {
                seq: c.u64()?,
                actions: c.f64_vec()?,
            },
            MSG_STEP_ACK => Message::StepAck {
                seq: c.u64()?,
                batch: get_batch(&mut c)?,
            },
            MSG_HEARTBEAT => Message::Heartbeat { nonce: c.u64()? },
            MSG_HEARTBEAT_ACK => Message::HeartbeatAck { nonce: c.u64()? },
            MSG_SHUTDOWN => Message::Shutdown,
            MSG_ERROR => Message::Error {
                code: c.u16()?,
                message: c.string()?,
            },
            _ => unreachable!(),
        };
        c.done()?;
        Ok(msg)
    }
}
