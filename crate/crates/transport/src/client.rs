//! TrainClient: concurrent dispatch to sessions, barrier join with a
//! straggler budget, deterministic single-threaded merge.

use std::collections::{BTreeMap, VecDeque};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::{Duration, Instant};

use polysim_sim::StepBatch;

use crate::error::TransportError;
use crate::session::Session;

/// Idle interval after which a session worker sends a keepalive.
pub const HEARTBEAT_INTERVAL: Duration = Duration::from_millis(500);

/// Straggler budget: wait at most `max(floor, relative * rolling median
/// step time)` for a session's reply before masking it dead for the run.
#[derive(Debug, Clone, Copy)]
pub struct StragglerBudget {
    pub relative: f64,
    pub floor: Duration,
}

impl Default for StragglerBudget {
    fn default() -> Self {
        StragglerBudget {
            relative: 3.0,
            floor: Duration::from_millis(1000),
        }
    }
}

impl StragglerBudget {
    fn deadline(&self, median_ms: Option<f64>) -> Duration {
        match median_ms {
            Some(m) => self.floor.max(Duration::from_secs_f64(self.relative * m / 1e3)),
            None => self.floor,
        }
    }
}

enum Cmd {
    Reset { seed: u64 },
    Step { actions: Vec<f64> },
    Shutdown,
}

struct Worker {
    tx: Sender<Cmd>,
    rx: Receiver<Result<StepBatch, TransportError>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

enum Channel {
    /// Remote session driven by a worker thread (concurrent dispatch).
    Worker(Worker),
    /// In-process session stepped inline on the caller thread; its
    /// internal router already fans out across backends.
    Local(Box<dyn Session>),
}

/// One session as seen by the merge loop.
struct Handle {
    name: String,
    env_count: usize,
    channel: Channel,
    alive: bool,
    /// Rolling window of recent step round-trip times, ms.
    step_ms: VecDeque<f64>,
}

impl Handle {
    fn median_ms(&self) -> Option<f64> {
        if self.step_ms.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = self.step_ms.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        Some(v[v.len() / 2])
    }
}

fn worker_loop(mut session: Box<dyn Session>, rx: Receiver<Cmd>, tx: Sender<Result<StepBatch, TransportError>>) {
    loop {
        match rx.recv_timeout(HEARTBEAT_INTERVAL) {
            Ok(Cmd::Reset { seed }) => {
                if tx.send(session.reset(seed)).is_err() {
                    break;
                }
            }
            Ok(Cmd::Step { actions }) => {
                if tx.send(session.step(&actions)).is_err() {
                    break;
                }
            }
            Ok(Cmd::Shutdown) | Err(RecvTimeoutError::Disconnected) => break,
            Err(RecvTimeoutError::Timeout) => {
                if session.heartbeat().is_err() {
                    break;
                }
            }
        }
    }
    let _ = session.shutdown();
}

/// Aggregates rollouts from several sessions into one vectorized
/// environment view with global env indices.
pub struct TrainClient {
    handles: Vec<Handle>,
    budget: StragglerBudget,
    obs_width: usize,
}

impl TrainClient {
    pub fn new(sessions: Vec<Box<dyn Session>>, budget: StragglerBudget) -> Result<TrainClient, TransportError> {
        if sessions.is_empty() {
            return Err(TransportError::AllSessionsDead);
        }
        let obs_width = sessions[0].obs_width();
        let mut handles = Vec::new();
        for s in sessions {
            let name = s.name().to_string();
            let env_count = s.env_count();
            let chan = if s.is_local() {
                Channel::Local(s)
            } else {
                let (ctx, crx) = channel();
                let (btx, brx) = channel();
                let thread = std::thread::spawn(move || worker_loop(s, crx, btx));
                Channel::Worker(Worker {
                    tx: ctx,
                    rx: brx,
                    thread: Some(thread),
                })
            };
            handles.push(Handle {
                name,
                env_count,
                channel: chan,
                alive: true,
                step_ms: VecDeque::new(),
            });
        }
        Ok(TrainClient {
            handles,
            budget,
            obs_width,
        })
    }

    pub fn n_envs(&self) -> usize {
        self.handles.iter().map(|h| h.env_count).sum()
    }

    pub fn obs_width(&self) -> usize {
        self.obs_width
    }

    /// (name, env_count, alive) per session, in global order.
    pub fn session_info(&self) -> Vec<(String, usize, bool)> {
        self.handles
            .iter()
            .map(|h| (h.name.clone(), h.env_count, h.alive))
            .collect()
    }

    /// Liveness mask over global env indices.
    pub fn live_mask(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.n_envs());
        for h in &self.handles {
            out.extend(std::iter::repeat(h.alive).take(h.env_count));
        }
        out
    }

    pub fn reset_all(&mut self, seed: u64) -> Result<StepBatch, TransportError> {
        self.round(|_| Cmd::Reset { seed }, false)
    }

    /// Dispatch per-session action slices concurrently; merge preserving
    /// global env order; sessions over budget are masked dead.
    pub fn step_all(&mut self, actions: &[f64]) -> Result<StepBatch, TransportError> {
        let expected: usize = self.n_envs();
        if actions.len() % expected != 0 {
            return Err(TransportError::MalformedPayload {
                msg: "STEP",
                reason: format!("action batch length {} not divisible by {expected}", actions.len()),
            });
        }
        let n_joints = actions.len() / expected;
        let mut offset = 0usize;
        let slices: Vec<Vec<f64>> = self
            .handles
            .iter()
            .map(|h| {
                let s = actions[offset * n_joints..(offset + h.env_count) * n_joints].to_vec();
                offset += h.env_count;
                s
            })
            .collect();
        let mut it = slices.into_iter();
        self.round(
            move |_| Cmd::Step {
                actions: it.next().expect("slice per handle"),
            },
            true,
        )
    }

    fn round(
        &mut self,
        mut cmd: impl FnMut(usize) -> Cmd,
        record_time: bool,
    ) -> Result<StepBatch, TransportError> {
        // Dispatch phase: worker sessions get their commands first so
        // they run concurrently with the inline local sessions.
        let mut cmds: Vec<Option<Cmd>> = (0..self.handles.len()).map(|i| Some(cmd(i))).collect();
        let mut sent = vec![false; self.handles.len()];
        for (i, h) in self.handles.iter_mut().enumerate() {
            if !h.alive {
                continue;
            }
            if let Channel::Worker(w) = &h.channel {
                let c = cmds[i].take().expect("command built per handle");
                if w.tx.send(c).is_ok() {
                    sent[i] = true;
                } else {
                    h.alive = false;
                }
            }
        }

        // Local phase: in-process sessions stepped on the caller thread.
        let mut replies: Vec<Option<StepBatch>> = Vec::with_capacity(self.handles.len());
        replies.resize_with(self.handles.len(), || None);
        for (i, h) in self.handles.iter_mut().enumerate() {
            if !h.alive {
                continue;
            }
            if let Channel::Local(session) = &mut h.channel {
                let t0 = Instant::now();
                let res = match cmds[i].take().expect("command built per handle") {
                    Cmd::Reset { seed } => session.reset(seed),
                    Cmd::Step { actions } => session.step(&actions),
                    Cmd::Shutdown => unreachable!("rounds never issue shutdown"),
                };
                match res {
                    Ok(batch) => {
                        if record_time {
                            h.step_ms.push_back(t0.elapsed().as_secs_f64() * 1e3);
                            if h.step_ms.len() > 32 {
                                h.step_ms.pop_front();
                            }
                        }
                        replies[i] = Some(batch);
                    }
                    Err(e) => {
                        log::warn!("session '{}' failed: {e}; masking dead", h.name);
                        h.alive = false;
                    }
                }
            }
        }

        // Join phase for worker sessions, with per-session deadlines.
        let budget = self.budget;
        for (i, h) in self.handles.iter_mut().enumerate() {
            if !sent[i] {
                continue;
            }
            let Channel::Worker(w) = &h.channel else {
                continue;
            };
            let deadline = budget.deadline(h.median_ms());
            let t0 = Instant::now();
            match w.rx.recv_timeout(deadline) {
                Ok(Ok(batch)) => {
                    if record_time {
                        h.step_ms.push_back(t0.elapsed().as_secs_f64() * 1e3);
                        if h.step_ms.len() > 32 {
                            h.step_ms.pop_front();
                        }
                    }
                    replies[i] = Some(batch);
                }
                Ok(Err(e)) => {
                    log::warn!("session '{}' failed: {e}; masking dead", h.name);
                    h.alive = false;
                }
                Err(_) => {
                    log::warn!(
                        "session '{}' exceeded straggler budget {:?}; masking dead",
                        h.name,
                        deadline
                    );
                    h.alive = false;
                }
            }
        }

        if self.handles.iter().all(|h| !h.alive) {
            return Err(TransportError::AllSessionsDead);
        }

        // Deterministic merge in global env order.
        let obs_width = self.obs_width;
        let n_envs = self.n_envs();
        let mut obs = vec![0.0; n_envs * obs_width];
        let mut rewards = vec![0.0; n_envs];
        let mut done = vec![false; n_envs];
        let mut mask = vec![false; n_envs];
        let mut info = BTreeMap::new();
        let mut base = 0usize;
        for (h, reply) in self.handles.iter().zip(replies.into_iter()) {
            match reply {
                Some(b) => {
                    obs[base * obs_width..(base + h.env_count) * obs_width].copy_from_slice(&b.obs);
                    rewards[base..base + h.env_count].copy_from_slice(&b.rewards);
                    done[base..base + h.env_count].copy_from_slice(&b.done);
                    mask[base..base + h.env_count].copy_from_slice(&b.mask);
                    for (k, v) in b.info {
                        info.insert(format!("{}/{k}", h.name), v);
                    }
                }
                None => {
                    for gi in base..base + h.env_count {
                        done[gi] = true;
                    }
                }
            }
            base += h.env_count;
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

    pub fn shutdown(&mut self) {
        for h in &mut self.handles {
            match &mut h.channel {
                Channel::Worker(w) => {
                    let _ = w.tx.send(Cmd::Shutdown);
                }
                Channel::Local(s) => {
                    let _ = s.shutdown();
                }
            }
        }
        for h in &mut self.handles {
            // Dead sessions may be wedged mid-step; detach rather than
            // block on them (their sockets time out on their own).
            if let (true, Channel::Worker(w)) = (h.alive, &mut h.channel) {
                if let Some(t) = w.thread.take() {
                    let _ = t.join();
                }
            }
        }
    }
}

impl Drop for TrainClient {
    fn drop(&mut self) {
        self.shutdown();
    }
}
