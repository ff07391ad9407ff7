//! Training regimes: single-backend, sequential stages, and parallel
//! multi-backend training over one harmonizing router.

use std::io::Write;
use std::path::PathBuf;

use polysim_sim::{
    PhysicalSpec, RewardConfig, Router, RouterConfig, RouterGroupConfig,
};
use polysim_transport::{LoopbackSession, Session, StragglerBudget, TrainClient};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, CheckpointPayload};
use crate::error::TrainerError;
use crate::net::{Adam, NetShape, PolicyNet};
use crate::ppo::{update, LossStats, PpoHyper};
use crate::rollout::rollout;

/// How the policy meets the backends over the course of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunRegime {
    /// All iterations against one backend.
    Single(String),
    /// Stages visited in order; each entry is (backend, iterations).
    /// Policy parameters and optimizer state carry across stage
    /// boundaries unchanged.
    Sequential(Vec<(String, usize)>),
    /// Every listed backend stepped concurrently each iteration through
    /// one router.
    Parallel(Vec<String>),
}

impl RunRegime {
    pub fn backends(&self) -> Vec<String> {
        match self {
            RunRegime::Single(b) => vec![b.clone()],
            RunRegime::Sequential(stages) => stages.iter().map(|(b, _)| b.clone()).collect(),
            RunRegime::Parallel(bs) => bs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub spec: PhysicalSpec,
    pub regime: RunRegime,
    pub hidden: (usize, usize),
    pub hyper: PpoHyper,
    pub horizon: usize,
    /// Iteration count for Single and Parallel regimes; Sequential takes
    /// its schedule from the stage list.
    pub iterations: usize,
    pub envs_per_backend: usize,
    pub init_noise: f64,
    pub reward: RewardConfig,
    pub seed: u64,
    /// When set, metrics.csv and final.ck are written here.
    pub out_dir: Option<PathBuf>,
}

impl TrainerConfig {
    pub fn quick(spec: PhysicalSpec, regime: RunRegime) -> TrainerConfig {
        TrainerConfig {
            spec,
            regime,
            hidden: (32, 32),
            hyper: PpoHyper::default(),
            horizon: 128,
            iterations: 20,
            envs_per_backend: 8,
            init_noise: 0.05,
            reward: RewardConfig::default(),
            seed: 0,
            out_dir: None,
        }
    }

    pub fn config_json(&self) -> Result<String, TrainerError> {
        serde_json::to_string(self).map_err(|e| TrainerError::Serialize(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub stage: usize,
    pub backend_set: String,
    pub wall_ms: f64,
    pub mean_reward: f64,
    pub stats: LossStats,
    /// Per-backend mean step milliseconds reported by the router.
    pub step_ms: Vec<(String, f64)>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub net: PolicyNet,
    pub optimizer: Adam,
    pub logs: Vec<IterationLog>,
}

/// Build a TrainClient whose single loopback session hosts one router
/// with a group per backend. The router's internal fan-out provides the
/// cross-backend concurrency; stepping stays inline in the caller.
pub fn loopback_client(
    spec: &PhysicalSpec,
    backends: &[String],
    envs_per_backend: usize,
    init_noise: f64,
    reward: RewardConfig,
    seed: u64,
) -> Result<TrainClient, TrainerError> {
    let groups = backends
        .iter()
        .enumerate()
        .map(|(i, b)| RouterGroupConfig {
            backend: b.clone(),
            env_count: envs_per_backend,
            seed_base: seed.wrapping_add(i as u64 * 1_000_003),
        })
        .collect();
    let router = Router::new(
        spec,
        &RouterConfig {
            groups,
            init_noise,
            reward: Some(reward),
        },
    )?;
    let session: Box<dyn Session> = Box::new(LoopbackSession::new("loopback", router));
    Ok(TrainClient::new(vec![session], StragglerBudget::default())?)
}

fn open_csv(out_dir: &PathBuf) -> Result<std::fs::File, TrainerError> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("metrics.csv");
    let fresh = !path.exists();
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(
            f,
            "iteration,stage,backends,wall_ms,mean_reward,policy_loss,value_loss,entropy,approx_kl,epochs_run,step_ms"
        )?;
    }
    Ok(f)
}

fn log_csv(f: &mut std::fs::File, l: &IterationLog) -> Result<(), TrainerError> {
    let step_ms = l
        .step_ms
        .iter()
        .map(|(b, ms)| format!("{b}:{ms:.4}"))
        .collect::<Vec<_>>()
        .join(" ");
    writeln!(
        f,
        "{},{},{},{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
        l.iteration,
        l.stage,
        l.backend_set,
        l.wall_ms,
        l.mean_reward,
        l.stats.policy_loss,
        l.stats.value_loss,
        l.stats.entropy,
        l.stats.approx_kl,
        l.stats.epochs_run,
        step_ms
    )?;
    Ok(())
}

/// Run training from a fresh network.
pub fn train(cfg: &TrainerConfig) -> Result<TrainOutcome, TrainerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shape = NetShape {
        obs_dim: polysim_sim::UNIFIED_OBS_LEN,
        act_dim: cfg.spec.kp.len(),
        hidden: cfg.hidden,
    };
    let net = PolicyNet::new(shape, &mut rng);
    let opt = Adam::new(net.params.len(), cfg.hyper.lr);
    train_from(cfg, net, opt, &mut rng)
}

/// Run training from explicit network + optimizer state. Sequential
/// stage handoff is this function called once: the same `net`/`opt`
/// flow through every stage without copying or re-init.
pub fn train_from(
    cfg: &TrainerConfig,
    mut net: PolicyNet,
    mut opt: Adam,
    rng: &mut ChaCha8Rng,
) -> Result<TrainOutcome, TrainerError> {
    // (stage index, backends for the stage, iterations in the stage)
    let stages: Vec<(usize, Vec<String>, usize)> = match &cfg.regime {
        RunRegime::Single(b) => vec![(0, vec![b.clone()], cfg.iterations)],
        RunRegime::Sequential(list) => {
            if list.is_empty() {
                return Err(TrainerError::InvalidRegime("empty stage list".into()));
            }
            list.iter()
                .enumerate()
                .map(|(i, (b, n))| (i, vec![b.clone()], *n))
                .collect()
        }
        RunRegime::Parallel(bs) => {
            if bs.is_empty() {
                return Err(TrainerError::InvalidRegime("empty backend list".into()));
            }
            vec![(0, bs.clone(), cfg.iterations)]
        }
    };

    let mut csv = match &cfg.out_dir {
        Some(d) => Some(open_csv(d)?),
        None => None,
    };
    let mut logs = Vec::new();
    let mut global_iter = 0usize;

    let run = (|| -> Result<(), TrainerError> {
        for (stage, backends, iters) in &stages {
            let mut client = loopback_client(
                &cfg.spec,
                backends,
                cfg.envs_per_backend,
                cfg.init_noise,
                cfg.reward,
                cfg.seed.wrapping_add(*stage as u64 * 7_919),
            )?;
            for it in 0..*iters {
                let t0 = std::time::Instant::now();
                // Fresh episodes each iteration; seeds advance so starts
                // vary but the whole run stays deterministic.
                let initial = client.reset_all(cfg.seed.wrapping_add(global_iter as u64))?;
                let (buf, last) =
                    rollout(&net, &mut client, initial, cfg.horizon, &cfg.reward, rng)?;
                let stats = update(&mut net, &mut opt, &buf, &cfg.hyper);
                let mean_reward = buf.mean_reward();
                let step_ms: Vec<(String, f64)> = last
                    .info
                    .iter()
                    .filter(|(k, _)| k.contains("step_ms/"))
                    .map(|(k, v)| {
                        (k.rsplit('/').next().unwrap_or(k).to_string(), *v)
                    })
                    .collect();
                let l = IterationLog {
                    iteration: global_iter,
                    stage: *stage,
                    backend_set: backends.join("+"),
                    wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                    mean_reward,
                    stats,
                    step_ms,
                };
                if let Some(f) = csv.as_mut() {
                    log_csv(f, &l)?;
                }
                logs.push(l);
                let _ = it;
                global_iter += 1;
            }
            client.shutdown();
        }
        Ok(())
    })();

    // Flush artifacts even when a stage aborted mid-run, so partial runs
    // leave an inspectable trail.
    if let Some(d) = &cfg.out_dir {
        let payload = CheckpointPayload {
            net: net.clone(),
            optimizer: opt.clone(),
            iteration: global_iter,
            stage: stages.len().saturating_sub(1),
        };
        checkpoint::save(&d.join("final.ck"), &payload, &cfg.config_json()?)?;
    }
    run?;

    Ok(TrainOutcome {
        net,
        optimizer: opt,
        logs,
    })
}
