//! On-policy rollout collection over a TrainClient.

use polysim_sim::{RewardConfig, StepBatch};
use polysim_transport::TrainClient;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::TrainerError;
use crate::net::{gaussian_log_prob, PolicyNet};
use crate::ppo::TrajectoryBuffer;

/// Standard normal draw via Box-Muller (keeps rand's core API only).
pub fn sample_standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Collect `horizon` steps starting from `initial` (the batch returned by
/// the latest reset or step). Pre-squash actions are stored; the envs see
/// tanh(action). Returns the buffer and the batch to resume from.
pub fn rollout(
    net: &PolicyNet,
    client: &mut TrainClient,
    initial: StepBatch,
    horizon: usize,
    reward_cfg: &RewardConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(TrajectoryBuffer, StepBatch), TrainerError> {
    let n_envs = initial.n_envs();
    let obs_dim = initial.obs_width;
    let act_dim = net.shape.act_dim;
    let mut buf = TrajectoryBuffer {
        n_envs,
        obs_dim,
        act_dim,
        horizon,
        last_values: vec![0.0; n_envs],
        ..Default::default()
    };
    let reward_lo = -(reward_cfg.action_rate_penalty * 4.0 * act_dim as f64);
    let reward_hi = 1.0 + reward_cfg.alive_bonus;

    let mut current = initial;
    for _ in 0..horizon {
        let mut raw_actions = vec![0.0; n_envs * act_dim];
        let mut env_actions = vec![0.0; n_envs * act_dim];
        let mut log_probs = vec![0.0; n_envs];
        let mut values = vec![0.0; n_envs];
        for e in 0..n_envs {
            if !current.mask[e] {
                continue;
            }
            let fwd = net.forward(current.obs_row(e));
            for k in 0..act_dim {
                let std = fwd.log_std[k].exp();
                let raw = fwd.mean[k] + std * sample_standard_normal(rng);
                raw_actions[e * act_dim + k] = raw;
                env_actions[e * act_dim + k] = raw.tanh();
            }
            log_probs[e] = gaussian_log_prob(
                &fwd.mean,
                &fwd.log_std,
                &raw_actions[e * act_dim..(e + 1) * act_dim],
            );
            values[e] = fwd.value;
        }

        let prev_mask = current.mask.clone();
        buf.obs.push(current.obs.clone());
        let next = client.step_all(&env_actions)?;

        // A step counts iff the env was live going in and came out live
        // (or terminated cleanly this step).
        let step_mask: Vec<bool> = (0..n_envs).map(|e| prev_mask[e] && next.mask[e]).collect();
        for e in 0..n_envs {
            if step_mask[e] {
                let r = next.rewards[e];
                assert!(
                    r > reward_lo && r <= reward_hi,
                    "reward {r} outside ({reward_lo}, {reward_hi}]"
                );
            }
        }
        buf.actions.push(raw_actions);
        buf.log_probs.push(log_probs);
        buf.values.push(values);
        buf.rewards.push(next.rewards.clone());
        buf.dones.push(next.done.clone());
        buf.masks.push(step_mask);
        current = next;
    }

    for e in 0..n_envs {
        if current.mask[e] {
            buf.last_values[e] = net.forward(current.obs_row(e)).value;
        }
    }
    Ok((buf, current))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetShape;
    use polysim_sim::{PhysicalSpec, Router, RouterConfig, RouterGroupConfig};
    use polysim_transport::{LoopbackSession, Session, StragglerBudget};
    use rand::SeedableRng;

    fn client_for(backends: &[(&str, usize)]) -> TrainClient {
        let spec = PhysicalSpec::default();
        let cfg = RouterConfig {
            groups: backends
                .iter()
                .map(|&(b, n)| RouterGroupConfig {
                    backend: b.into(),
                    env_count: n,
                    seed_base: 50,
                })
                .collect(),
            init_noise: 0.05,
            reward: None,
        };
        let router = Router::new(&spec, &cfg).unwrap();
        let session: Box<dyn Session> = Box::new(LoopbackSession::new("mix", router));
        TrainClient::new(vec![session], StragglerBudget::default()).unwrap()
    }

    #[test]
    fn rollout_shapes_and_masks() {
        let mut client = client_for(&[("A", 2), ("D", 2)]);
        let initial = client.reset_all(3).unwrap();
        let shape = NetShape {
            obs_dim: initial.obs_width,
            act_dim: 1,
            hidden: (8, 8),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = PolicyNet::new(shape, &mut rng);
        let (buf, resumed) = rollout(
            &net,
            &mut client,
            initial,
            16,
            &RewardConfig::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(buf.horizon, 16);
        assert_eq!(buf.n_envs, 4);
        assert_eq!(buf.obs.len(), 16);
        assert!(buf.masks.iter().flatten().filter(|m| **m).count() > 0);
        assert_eq!(resumed.n_envs(), 4);
    }

    #[test]
    fn rollout_deterministic_under_seed() {
        let run = || {
            let mut client = client_for(&[("B", 3)]);
            let initial = client.reset_all(9).unwrap();
            let shape = NetShape {
                obs_dim: initial.obs_width,
                act_dim: 1,
                hidden: (8, 8),
            };
            let mut nrng = ChaCha8Rng::seed_from_u64(1);
            let net = PolicyNet::new(shape, &mut nrng);
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let (buf, _) = rollout(
                &net,
                &mut client,
                initial,
                12,
                &RewardConfig::default(),
                &mut rng,
            )
            .unwrap();
            (buf.rewards, buf.actions)
        };
        let (r1, a1) = run();
        let (r2, a2) = run();
        assert_eq!(r1, r2);
        assert_eq!(a1, a2);
    }
}
