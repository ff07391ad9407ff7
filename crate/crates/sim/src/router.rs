//! The harmonizing router: physics harmonization, API translation, and
//! numerical normalization over heterogeneous backends, presented as one
//! vectorized environment with invariant semantics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::{build_backend, Backend, NativeConfig, NativeState};
use crate::descriptor::{descriptor_by_name, BackendDescriptor, ContactModel};
use crate::error::SimError;
use crate::reference::ReferenceTrajectory;
use crate::spec::PhysicalSpec;

/// Fixed unified observation layout (1 joint):
/// `[joint pos rad, joint vel rad/s, base height m, base vel m/s,
///   contact {0,1}, reference target rad, reference phase [0,1)]`
pub const UNIFIED_OBS_LEN: usize = 7;

pub type UnifiedObservation = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualMismatch {
    pub field: String,
    pub reason: String,
    pub value: f64,
}

/// Spec fields that could not be mapped onto a backend's native
/// configuration — reported, never silently dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResidualReport {
    pub backend: String,
    pub mismatches: Vec<ResidualMismatch>,
}

/// Map the unified spec onto one backend's native configuration.
pub fn harmonize(
    spec: &PhysicalSpec,
    desc: &BackendDescriptor,
) -> Result<(NativeConfig, ResidualReport), SimError> {
    spec.validate()?;
    desc.validate()?;
    let reference = ReferenceTrajectory::by_id(&spec.reference_id)?;
    let unit = desc.angle_unit.from_radians();
    let mut report = ResidualReport {
        backend: desc.name.clone(),
        mismatches: Vec::new(),
    };
    let (contact_stiffness, contact_damping) = match desc.contact {
        ContactModel::PenaltySpringDamper => {
            (Some(spec.contact_stiffness), Some(spec.contact_damping))
        }
        ContactModel::VelocityImpulse => {
            report.mismatches.push(ResidualMismatch {
                field: "contact_stiffness".into(),
                reason: "impulse contact has no compliance parameter".into(),
                value: spec.contact_stiffness,
            });
            report.mismatches.push(ResidualMismatch {
                field: "contact_damping".into(),
                reason: "impulse contact has no damping parameter".into(),
                value: spec.contact_damping,
            });
            (None, None)
        }
    };
    let cfg = NativeConfig {
        gravity: spec.gravity,
        timestep: spec.timestep,
        base_mass: spec.base_mass(),
        arm_mass: spec.arm_mass(),
        arm_length: spec.arm_length(),
        joint_limits: spec.joint_limits.clone(),
        native_joint_limits: spec
            .joint_limits
            .iter()
            .map(|&(lo, hi)| (lo * unit, hi * unit))
            .collect(),
        torque_limit: spec.torque_limit,
        friction: spec.ground_friction,
        contact_stiffness,
        contact_damping,
        kp: spec.kp.clone(),
        kd: spec.kd.clone(),
        native_kp: spec.kp.iter().map(|&g| g / unit).collect(),
        native_kd: spec.kd.iter().map(|&g| g / unit).collect(),
        action_lo: desc.action_range.iter().map(|r| r.0).collect(),
        action_hi: desc.action_range.iter().map(|r| r.1).collect(),
        reference,
    };
    Ok((cfg, report))
}

/// Native state -> unified observation. The layout permutation is
/// inverted, angles converted to radians, and reference fields appended.
pub fn translate_obs(
    native: &NativeState,
    desc: &BackendDescriptor,
    reference: &ReferenceTrajectory,
    t: f64,
) -> Result<UnifiedObservation, SimError> {
    if native.values.iter().any(|v| !v.is_finite()) {
        return Err(SimError::Diverged {
            backend: desc.name.clone(),
            step: 0,
        });
    }
    let n = desc.layout.len();
    let mut canonical = vec![0.0; n];
    for (i, &slot) in desc.layout.iter().enumerate() {
        canonical[slot] = native.values[i];
    }
    let unit = desc.angle_unit.from_radians();
    Ok(vec![
        canonical[0] / unit,
        canonical[1] / unit,
        canonical[2],
        canonical[3],
        canonical[4],
        reference.target(t),
        reference.phase_at(t),
    ])
}

/// Unified action in [-1, 1] -> native action: affine onto the
/// descriptor's native range, with out-of-range inputs clipped first.
/// Returns the native action and whether clipping occurred.
pub fn translate_action(u: &[f64], desc: &BackendDescriptor) -> (Vec<f64>, bool) {
    let mut clipped = false;
    let native = desc
        .action_range
        .iter()
        .zip(u.iter())
        .map(|(&(lo, hi), &a)| {
            let a = if a.is_finite() {
                a
            } else {
                clipped = true;
                0.0
            };
            let c = a.clamp(-1.0, 1.0);
            if c != a {
                clipped = true;
            }
            lo + (c + 1.0) / 2.0 * (hi - lo)
        })
        .collect();
    (native, clipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Tracking-error scale in exp(-c * |err|).
    pub error_scale: f64,
    pub alive_bonus: f64,
    /// Coefficient on |a_t - a_{t-1}|^2.
    pub action_rate_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            error_scale: 3.0,
            alive_bonus: 0.2,
            action_rate_penalty: 0.05,
        }
    }
}

/// Central reward, computed once in unified space so every backend shares
/// reward semantics. `r in (-penalty_max, 1 + alive_bonus]`.
pub fn central_reward(cfg: &RewardConfig, obs: &[f64], action: &[f64], prev_action: &[f64]) -> f64 {
    let err = (obs[0] - obs[5]).abs();
    let rate: f64 = action
        .iter()
        .zip(prev_action.iter())
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    (-cfg.error_scale * err).exp() + cfg.alive_bonus - cfg.action_rate_penalty * rate
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnvSlot {
    pub global_index: usize,
    pub backend: String,
    pub local_index: usize,
    pub alive: bool,
}

/// One backend's share of the vectorized environment.
struct Group {
    desc: BackendDescriptor,
    cfg: NativeConfig,
    report: ResidualReport,
    backends: Vec<Backend>,
    /// First global index of this group's contiguous slot range.
    base: usize,
    alive: Vec<bool>,
    /// Whole-group kill switch (fault isolation).
    available: bool,
    divergences: u64,
    step_ms_total: f64,
    steps: u64,
    #[cfg(test)]
    test_delay_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterGroupConfig {
    pub backend: String,
    pub env_count: usize,
    pub seed_base: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterConfig {
    pub groups: Vec<RouterGroupConfig>,
    pub init_noise: f64,
    #[serde(default)]
    pub reward: Option<RewardConfig>,
}

/// Merged result of one vectorized step, in global env order.
#[derive(Debug, Clone, PartialEq)]
pub struct StepBatch {
    pub obs: Vec<f64>,
    pub obs_width: usize,
    pub rewards: Vec<f64>,
    pub done: Vec<bool>,
    pub mask: Vec<bool>,
    pub info: BTreeMap<String, f64>,
}

impl StepBatch {
    pub fn n_envs(&self) -> usize {
        self.rewards.len()
    }

    pub fn obs_row(&self, i: usize) -> &[f64] {
        &self.obs[i * self.obs_width..(i + 1) * self.obs_width]
    }
}

pub struct Router {
    groups: Vec<Group>,
    spec: PhysicalSpec,
    reward_cfg: RewardConfig,
    init_noise: f64,
    prev_actions: Vec<f64>,
    n_envs: usize,
    n_joints: usize,
}

impl Router {
    pub fn new(spec: &PhysicalSpec, config: &RouterConfig) -> Result<Router, SimError> {
        if config.groups.is_empty() {
            return Err(SimError::RouterConfig("no backend groups configured".into()));
        }
        let mut groups = Vec::new();
        let mut base = 0usize;
        let mut obs_len = None;
        for gc in &config.groups {
            if gc.env_count == 0 {
                return Err(SimError::RouterConfig(format!(
                    "backend '{}' has zero envs",
                    gc.backend
                )));
            }
            let desc = descriptor_by_name(&gc.backend)?;
            let (cfg, report) = harmonize(spec, &desc)?;
            let backends = (0..gc.env_count)
                .map(|i| build_backend(&desc, spec, gc.seed_base + i as u64))
                .collect::<Result<Vec<_>, _>>()?;
            // Shape invariance asserted at construction.
            let this_len = UNIFIED_OBS_LEN + (desc.n_joints() - 1) * 3;
            match obs_len {
                None => obs_len = Some(this_len),
                Some(l) if l == this_len => {}
                Some(l) => {
                    return Err(SimError::RouterConfig(format!(
                        "observation length mismatch: {l} vs {this_len}"
                    )))
                }
            }
            groups.push(Group {
                desc,
                cfg,
                report,
                backends,
                base,
                alive: vec![true; gc.env_count],
                available: true,
                divergences: 0,
                step_ms_total: 0.0,
                steps: 0,
                #[cfg(test)]
                test_delay_ms: 0,
            });
            base += gc.env_count;
        }
        let n_joints = groups[0].desc.n_joints();
        Ok(Router {
            groups,
            spec: spec.clone(),
            reward_cfg: config.reward.unwrap_or_default(),
            init_noise: config.init_noise,
            prev_actions: vec![0.0; base * n_joints],
            n_envs: base,
            n_joints,
        })
    }

    pub fn n_envs(&self) -> usize {
        self.n_envs
    }

    pub fn n_joints(&self) -> usize {
        self.n_joints
    }

    pub fn obs_width(&self) -> usize {
        UNIFIED_OBS_LEN
    }

    pub fn spec(&self) -> &PhysicalSpec {
        &self.spec
    }

    pub fn slots(&self) -> Vec<EnvSlot> {
        let mut out = Vec::with_capacity(self.n_envs);
        for g in &self.groups {
            for (i, &alive) in g.alive.iter().enumerate() {
                out.push(EnvSlot {
                    global_index: g.base + i,
                    backend: g.desc.name.clone(),
                    local_index: i,
                    alive: alive && g.available,
                });
            }
        }
        out
    }

    pub fn residual_reports(&self) -> Vec<&ResidualReport> {
        self.groups.iter().map(|g| &g.report).collect()
    }

    #[cfg(test)]
    fn set_test_delay(&mut self, name: &str, ms: u64) {
        for g in &mut self.groups {
            if g.desc.name == name {
                g.test_delay_ms = ms;
            }
        }
    }

    /// Fault injection / fault isolation: mark a whole backend group dead.
    pub fn kill_backend(&mut self, name: &str) {
        for g in &mut self.groups {
            if g.desc.name == name {
                g.available = false;
            }
        }
    }

    /// Reset every env. Per-env seeds derive from (seed, global index) so
    /// trajectories are reproducible and distinct across envs.
    pub fn reset(&mut self, seed: u64) -> StepBatch {
        let init_noise = self.init_noise;
        let reward_len = self.n_envs;
        let obs_width = self.obs_width();
        let mut obs = vec![0.0; reward_len * obs_width];
        let mut done = vec![false; reward_len];
        let mut mask = vec![true; reward_len];
        for g in &mut self.groups {
            for (i, b) in g.backends.iter_mut().enumerate() {
                let gi = g.base + i;
                if !g.available {
                    done[gi] = true;
                    mask[gi] = false;
                    continue;
                }
                g.alive[i] = true;
                let native = b.native_reset(seed.wrapping_mul(0x9E3779B97F4A7C15) ^ gi as u64, init_noise);
                let u = translate_obs(&native, &g.desc, &g.cfg.reference, b.time())
                    .expect("reset state is finite");
                obs[gi * obs_width..(gi + 1) * obs_width].copy_from_slice(&u);
            }
        }
        for a in &mut self.prev_actions {
            *a = 0.0;
        }
        StepBatch {
            obs,
            obs_width,
            rewards: vec![0.0; reward_len],
            done,
            mask,
            info: BTreeMap::new(),
        }
    }

    /// Scatter actions by slot, step every backend group concurrently,
    /// gather in global index order, and compute rewards centrally.
    pub fn vector_step(&mut self, actions: &[f64]) -> Result<StepBatch, SimError> {
        if actions.len() != self.n_envs * self.n_joints {
            return Err(SimError::BatchLength {
                got: actions.len(),
                expected: self.n_envs * self.n_joints,
            });
        }
        let obs_width = self.obs_width();
        let n_envs = self.n_envs;
        let n_joints = self.n_joints;

        // Fan out: one thread per backend group, barrier join. Each group
        // owns its backends; results come back tagged with the group's
        // base index so gather order is a function of global index only.
        struct GroupResult {
            base: usize,
            // Per local env: Ok(unified obs) or None for dead slots.
            obs: Vec<Option<UnifiedObservation>>,
            newly_dead: Vec<usize>,
            elapsed_ms: f64,
        }

        let results: Vec<GroupResult> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for g in &mut self.groups {
                let acts = actions;
                handles.push(scope.spawn(move || {
                    #[cfg(test)]
                    if g.test_delay_ms > 0 {
                        std::thread::sleep(std::time::Duration::from_millis(g.test_delay_ms));
                    }
                    let t0 = std::time::Instant::now();
                    let mut obs = vec![None; g.backends.len()];
                    let mut newly_dead = Vec::new();
                    if g.available {
                        for (i, b) in g.backends.iter_mut().enumerate() {
                            if !g.alive[i] {
                                continue;
                            }
                            let gi = g.base + i;
                            let u = &acts[gi * n_joints..(gi + 1) * n_joints];
                            let (native_act, _clipped) = translate_action(u, &g.desc);
                            match b.native_step(&native_act) {
                                Ok(native) => {
                                    match translate_obs(&native, &g.desc, &g.cfg.reference, b.time())
                                    {
                                        Ok(o) => obs[i] = Some(o),
                                        Err(_) => newly_dead.push(i),
                                    }
                                }
                                Err(_) => newly_dead.push(i),
                            }
                        }
                    }
                    GroupResult {
                        base: g.base,
                        obs,
                        newly_dead,
                        elapsed_ms: t0.elapsed().as_secs_f64() * 1e3,
                    }
                }));
            }
            handles.into_iter().map(|h| h.join().expect("group thread")).collect()
        });

        // Gather at the barrier; router state mutated only here.
        let mut obs = vec![0.0; n_envs * obs_width];
        let mut rewards = vec![0.0; n_envs];
        let mut done = vec![false; n_envs];
        let mut mask = vec![false; n_envs];
        let mut results = results;
        results.sort_by_key(|r| r.base);
        for r in results {
            let g = self
                .groups
                .iter_mut()
                .find(|g| g.base == r.base)
                .expect("group for result");
            for &i in &r.newly_dead {
                g.alive[i] = false;
                g.divergences += 1;
            }
            g.step_ms_total += r.elapsed_ms;
            g.steps += 1;
            for (i, o) in r.obs.into_iter().enumerate() {
                let gi = r.base + i;
                match o {
                    Some(u) => {
                        let a = &actions[gi * n_joints..(gi + 1) * n_joints];
                        let prev = &self.prev_actions[gi * n_joints..(gi + 1) * n_joints];
                        rewards[gi] = central_reward(&self.reward_cfg, &u, a, prev);
                        obs[gi * obs_width..(gi + 1) * obs_width].copy_from_slice(&u);
                        mask[gi] = true;
                    }
                    None => {
                        done[gi] = true;
                    }
                }
            }
        }
        for (p, a) in self.prev_actions.iter_mut().zip(actions.iter()) {
            *p = *a;
        }

        let mut info = BTreeMap::new();
        for g in &self.groups {
            info.insert(format!("clip_events/{}", g.desc.name), g.total_clips() as f64);
            info.insert(format!("divergences/{}", g.desc.name), g.divergences as f64);
            info.insert(
                format!("step_ms/{}", g.desc.name),
                if g.steps > 0 { g.step_ms_total / g.steps as f64 } else { 0.0 },
            );
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

    /// Per-backend diagnostics as a JSON value (dumped every N steps by
    /// the driving process).
    pub fn diagnostics(&self) -> serde_json::Value {
        let per_backend: Vec<serde_json::Value> = self
            .groups
            .iter()
            .map(|g| {
                serde_json::json!({
                    "backend": g.desc.name,
                    "available": g.available,
                    "alive": g.alive.iter().filter(|a| **a).count(),
                    "envs": g.backends.len(),
                    "clip_events": g.total_clips(),
                    "divergences": g.divergences,
                    "mean_step_ms": if g.steps > 0 { g.step_ms_total / g.steps as f64 } else { 0.0 },
                    "residual_mismatches": g.report,
                })
            })
            .collect();
        serde_json::json!({ "backends": per_backend })
    }
}

impl Group {
    fn total_clips(&self) -> u64 {
        self.backends.iter().map(|b| b.clip_events()).sum()
    }
}
