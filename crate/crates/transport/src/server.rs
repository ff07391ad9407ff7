//! SimServer: hosts one backend's envs behind the PSIM protocol.

use std::io::{BufReader, BufWriter, Read};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use polysim_sim::{PhysicalSpec, Router, RouterConfig, RouterGroupConfig, RewardConfig};
use serde::{Deserialize, Serialize};

use crate::error::TransportError;
use crate::frame::{Frame, Message};
use crate::session::ENCODING;

pub const ERR_MALFORMED: u16 = 1;
pub const ERR_SEQUENCE: u16 = 2;
pub const ERR_NEGOTIATION: u16 = 3;
pub const ERR_INTERNAL: u16 = 4;

fn default_init_noise() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimServerConfig {
    /// Backend descriptor name (one of the shipped A/B/C/D).
    pub backend: String,
    pub env_count: usize,
    pub seed_base: u64,
    pub spec: PhysicalSpec,
    #[serde(default = "default_init_noise")]
    pub init_noise: f64,
    #[serde(default)]
    pub reward: Option<RewardConfig>,
    /// Testing facility: artificial delay added before every STEP reply,
    /// used by the latency/fault harnesses.
    #[serde(default)]
    pub artificial_step_delay_ms: u64,
}

impl SimServerConfig {
    pub fn router_config(&self) -> RouterConfig {
        RouterConfig {
            groups: vec![RouterGroupConfig {
                backend: self.backend.clone(),
                env_count: self.env_count,
                seed_base: self.seed_base,
            }],
            init_noise: self.init_noise,
            reward: self.reward,
        }
    }
}

/// A running server bound to a local address. Sessions are handled one at
/// a time; each new connection gets a freshly built router so trajectories
/// are deterministic per session.
pub struct SimServer {
    pub local_addr: std::net::SocketAddr,
    stop: Arc<AtomicBool>,
    active: Arc<std::sync::Mutex<Option<TcpStream>>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl SimServer {
    /// Bind and serve on a background thread (used by tests and the
    /// in-process harness). `bind` may be "127.0.0.1:0" for an ephemeral
    /// port.
    pub fn spawn(config: SimServerConfig, bind: &str) -> Result<SimServer, TransportError> {
        let listener = TcpListener::bind(bind)?;
        let local_addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let active = Arc::new(std::sync::Mutex::new(None));
        let stop2 = stop.clone();
        let active2 = active.clone();
        let thread = std::thread::spawn(move || serve_loop(listener, config, stop2, active2));
        Ok(SimServer {
            local_addr,
            stop,
            active,
            thread: Some(thread),
        })
    }

    /// Hard kill: sever any active session and stop accepting.
    pub fn stop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Ok(mut guard) = self.active.lock() {
            if let Some(s) = guard.take() {
                let _ = s.shutdown(std::net::Shutdown::Both);
            }
        }
        // Nudge the accept loop; dropped immediately so the handler sees
        // EOF rather than a silent connection.
        let _ = TcpStream::connect(self.local_addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for SimServer {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Foreground server loop for the `simserver` binary.
pub fn serve(config: SimServerConfig, bind: &str) -> Result<(), TransportError> {
    let listener = TcpListener::bind(bind)?;
    log::info!("simserver listening on {}", listener.local_addr()?);
    serve_loop(
        listener,
        config,
        Arc::new(AtomicBool::new(false)),
        Arc::new(std::sync::Mutex::new(None)),
    );
    Ok(())
}

fn serve_loop(
    listener: TcpListener,
    config: SimServerConfig,
    stop: Arc<AtomicBool>,
    active: Arc<std::sync::Mutex<Option<TcpStream>>>,
) {
    for conn in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        match conn {
            Ok(stream) => {
                if let (Ok(clone), Ok(mut guard)) = (stream.try_clone(), active.lock()) {
                    *guard = Some(clone);
                }
                let shutdown = handle_session(stream, &config);
                if let Ok(mut guard) = active.lock() {
                    *guard = None;
                }
                if shutdown || stop.load(Ordering::SeqCst) {
                    break;
                }
            }
            Err(e) => {
                log::warn!("accept failed: {e}");
            }
        }
    }
}

fn send(writer: &mut BufWriter<TcpStream>, msg: Message) -> Result<(), TransportError> {
    msg.encode().write_to(writer)
}

fn send_error(writer: &mut BufWriter<TcpStream>, code: u16, message: String) {
    let _ = send(writer, Message::Error { code, message });
}

/// Returns true if the client requested server shutdown.
fn handle_session(stream: TcpStream, config: &SimServerConfig) -> bool {
    let _ = stream.set_nodelay(true);
    // Generous read timeout: three missed heartbeat intervals.
    let _ = stream.set_read_timeout(Some(Duration::from_secs(30)));
    let mut reader = BufReader::new(match stream.try_clone() {
        Ok(s) => s,
        Err(_) => return false,
    });
    let mut writer = BufWriter::new(stream);

    let mut router: Option<Router> = None;
    let mut expected_seq: u64 = 1;

    loop {
        let frame = match Frame::read_from(&mut reader) {
            Ok(f) => f,
            Err(TransportError::Io(e)) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                return false; // client hung up
            }
            Err(e) => {
                send_error(&mut writer, ERR_MALFORMED, format!("bad frame: {e}"));
                return false; // malformed framing: close session
            }
        };
        let msg = match Message::decode(&frame) {
            Ok(m) => m,
            Err(e) => {
                send_error(&mut writer, ERR_MALFORMED, format!("bad message: {e}"));
                return false;
            }
        };
        match msg {
            Message::Hello { encoding, backend, .. } => {
                if encoding != ENCODING {
                    send_error(
                        &mut writer,
                        ERR_NEGOTIATION,
                        format!("encoding '{encoding}' unsupported, server speaks '{ENCODING}'"),
                    );
                    return false;
                }
                if backend != config.backend {
                    send_error(
                        &mut writer,
                        ERR_NEGOTIATION,
                        format!(
                            "client expects backend '{backend}', server hosts '{}'",
                            config.backend
                        ),
                    );
                    return false;
                }
                let r = match Router::new(&config.spec, &config.router_config()) {
                    Ok(r) => r,
                    Err(e) => {
                        send_error(&mut writer, ERR_INTERNAL, e.to_string());
                        return false;
                    }
                };
                let ack = Message::HelloAck {
                    backend: config.backend.clone(),
                    env_count: r.n_envs() as u32,
                    obs_width: r.obs_width() as u32,
                };
                router = Some(r);
                expected_seq = 1;
                if send(&mut writer, ack).is_err() {
                    return false;
                }
            }
            Message::Reset { seq, seed } => {
                let Some(r) = router.as_mut() else {
                    send_error(&mut writer, ERR_MALFORMED, "RESET before HELLO".into());
                    return false;
                };
                if seq != expected_seq {
                    send_error(
                        &mut writer,
                        ERR_SEQUENCE,
                        format!("expected seq {expected_seq}, got {seq}"),
                    );
                    return false;
                }
                expected_seq += 1;
                let batch = r.reset(seed);
                if send(&mut writer, Message::ResetAck { seq, batch }).is_err() {
                    return false;
                }
            }
            Message::Step { seq, actions } => {
                let Some(r) = router.as_mut() else {
                    send_error(&mut writer, ERR_MALFORMED, "STEP before HELLO".into());
                    return false;
                };
                if seq != expected_seq {
                    send_error(
                        &mut writer,
                        ERR_SEQUENCE,
                        format!("expected seq {expected_seq}, got {seq}"),
                    );
                    return false;
                }
                expected_seq += 1;
                if config.artificial_step_delay_ms > 0 {
                    std::thread::sleep(Duration::from_millis(config.artificial_step_delay_ms));
                }
                match r.vector_step(&actions) {
                    Ok(batch) => {
                        if send(&mut writer, Message::StepAck { seq, batch }).is_err() {
                            return false;
                        }
                    }
                    Err(e) => {
                        // Backend divergence is flagged inside the batch;
                        // reaching here means a batch-shape error.
                        send_error(&mut writer, ERR_MALFORMED, e.to_string());
                        return false;
                    }
                }
            }
            Message::Heartbeat { nonce } => {
                if send(&mut writer, Message::HeartbeatAck { nonce }).is_err() {
                    return false;
                }
            }
            Message::Shutdown => {
                return true;
            }
            other => {
                send_error(
                    &mut writer,
                    ERR_MALFORMED,
                    format!("unexpected client message type {:#06x}", other.msg_type()),
                );
                return false;
            }
        }
    }
}

/// Drain-and-ignore helper for tests that poke raw bytes at the server.
#[doc(hidden)]
pub fn read_all(stream: &mut TcpStream) -> Vec<u8> {
    let mut buf = Vec::new();
    let _ = stream.read_to_end(&mut buf);
    buf
}
