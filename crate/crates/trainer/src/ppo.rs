//! Trajectory buffer, GAE, and the clipped-surrogate update.

use serde::{Deserialize, Serialize};

use crate::net::{gaussian_log_prob, Adam, PolicyNet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoHyper {
    pub lr: f64,
    pub clip: f64,
    pub epochs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub gamma: f64,
    pub lam: f64,
    /// Epochs halt once approximate KL exceeds this.
    pub kl_threshold: f64,
    pub max_grad_norm: f64,
}

impl Default for PpoHyper {
    fn default() -> Self {
        PpoHyper {
            lr: 3e-4,
            clip: 0.2,
            epochs: 4,
            value_coef: 0.5,
            entropy_coef: 1e-3,
            gamma: 0.99,
            lam: 0.95,
            kl_threshold: 0.03,
            max_grad_norm: 0.5,
        }
    }
}

/// On-policy rollout storage, step-major over a fixed env set.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryBuffer {
    pub n_envs: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub horizon: usize,
    /// [t][env * obs_dim + k]
    pub obs: Vec<Vec<f64>>,
    /// Pre-squash actions drawn from the Gaussian head.
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    pub rewards: Vec<Vec<f64>>,
    pub dones: Vec<Vec<bool>>,
    /// Liveness: false entries carry zero loss weight.
    pub masks: Vec<Vec<bool>>,
    /// Bootstrap values for the state after the last step.
    pub last_values: Vec<f64>,
}

impl TrajectoryBuffer {
    /// Mean per-step reward over live (masked-in) transitions.
    pub fn mean_reward(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (rs, ms) in self.rewards.iter().zip(self.masks.iter()) {
            for (r, m) in rs.iter().zip(ms.iter()) {
                if *m {
                    sum += r;
                    n += 1;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Advantages {
    /// [t][env], zero where masked.
    pub adv: Vec<Vec<f64>>,
    pub returns: Vec<Vec<f64>>,
    pub n_included: usize,
}

/// GAE(lambda) per env; dead-masked steps break the recursion and are
/// excluded from the sample count.
pub fn compute_gae(buf: &TrajectoryBuffer, gamma: f64, lam: f64) -> Advantages {
    let t_max = buf.horizon;
    let mut adv = vec![vec![0.0; buf.n_envs]; t_max];
    let mut returns = vec![vec![0.0; buf.n_envs]; t_max];
    let mut n_included = 0usize;
    for e in 0..buf.n_envs {
        let mut running = 0.0;
        for t in (0..t_max).rev() {
            if !buf.masks[t][e] {
                running = 0.0;
                continue;
            }
            n_included += 1;
            let next_value = if buf.dones[t][e] {
                0.0
            } else if t + 1 == t_max {
                buf.last_values[e]
            } else if buf.masks[t + 1][e] {
                buf.values[t + 1][e]
            } else {
                0.0
            };
            if buf.dones[t][e] {
                running = 0.0;
            }
            let delta = buf.rewards[t][e] + gamma * next_value - buf.values[t][e];
            running = delta + gamma * lam * running;
            adv[t][e] = running;
            returns[t][e] = running + buf.values[t][e];
        }
    }
    Advantages {
        adv,
        returns,
        n_included,
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub epochs_run: usize,
}

/// Total loss and its gradient over the whole (mask-weighted) buffer.
/// Exposed for the finite-difference oracle.
pub fn loss_and_grad(
    net: &PolicyNet,
    buf: &TrajectoryBuffer,
    adv: &Advantages,
    adv_mean: f64,
    adv_std: f64,
    hyper: &PpoHyper,
) -> (LossStats, Vec<f64>, f64) {
    let mut grad = vec![0.0; net.params.len()];
    let mut stats = LossStats::default();
    let mut total_loss = 0.0;
    let n = adv.n_included.max(1) as f64;
    let mut clipped_count = 0usize;

    for t in 0..buf.horizon {
        for e in 0..buf.n_envs {
            if !buf.masks[t][e] {
                continue;
            }
            let obs = &buf.obs[t][e * buf.obs_dim..(e + 1) * buf.obs_dim];
            let action = &buf.actions[t][e * buf.act_dim..(e + 1) * buf.act_dim];
            let fwd = net.forward(obs);
            let lp_new = gaussian_log_prob(&fwd.mean, &fwd.log_std, action);
            let lp_old = buf.log_probs[t][e];
            let a_norm = (adv.adv[t][e] - adv_mean) / adv_std;
            let ratio = (lp_new - lp_old).exp();
            let clipped_ratio = ratio.clamp(1.0 - hyper.clip, 1.0 + hyper.clip);
            let surr = (ratio * a_norm).min(clipped_ratio * a_norm);
            let value_err = fwd.value - adv.returns[t][e];
            let entropy: f64 = fwd
                .log_std
                .iter()
                .map(|ls| ls + 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln())
                .sum();

            total_loss += (-surr
                + hyper.value_coef * 0.5 * value_err * value_err
                - hyper.entropy_coef * entropy)
                / n;
            stats.policy_loss -= surr / n;
            stats.value_loss += 0.5 * value_err * value_err / n;
            stats.entropy += entropy / n;
            stats.approx_kl += (lp_old - lp_new) / n;
            let active = (a_norm >= 0.0 && ratio <= 1.0 + hyper.clip)
                || (a_norm < 0.0 && ratio >= 1.0 - hyper.clip);
            if !active {
                clipped_count += 1;
            }

            // d(-surr)/d(lp_new): the clipped branch has zero gradient.
            let d_lp = if active { -a_norm * ratio / n } else { 0.0 };
            let d_value = hyper.value_coef * value_err / n;
            let mut d_mean = vec![0.0; buf.act_dim];
            let mut d_log_std = vec![0.0; buf.act_dim];
            for k in 0..buf.act_dim {
                let inv_var = (-2.0 * fwd.log_std[k]).exp();
                let diff = action[k] - fwd.mean[k];
                // d(lp)/d(mean), d(lp)/d(log_std), plus the entropy term.
                d_mean[k] = d_lp * diff * inv_var;
                d_log_std[k] = d_lp * (diff * diff * inv_var - 1.0) - hyper.entropy_coef / n;
            }
            net.backward(&fwd, &d_mean, d_value, &d_log_std, &mut grad);
        }
    }
    stats.clip_fraction = clipped_count as f64 / n;
    (stats, grad, total_loss)
}

fn adv_moments(adv: &Advantages, buf: &TrajectoryBuffer) -> (f64, f64) {
    let n = adv.n_included.max(1) as f64;
    let mut mean = 0.0;
    for t in 0..buf.horizon {
        for e in 0..buf.n_envs {
            if buf.masks[t][e] {
                mean += adv.adv[t][e];
            }
        }
    }
    mean /= n;
    let mut var = 0.0;
    for t in 0..buf.horizon {
        for e in 0..buf.n_envs {
            if buf.masks[t][e] {
                var += (adv.adv[t][e] - mean) * (adv.adv[t][e] - mean);
            }
        }
    }
    (mean, (var / n).sqrt().max(1e-8))
}

/// Advantage-normalized clipped-surrogate update with a KL guard.
/// Non-finite losses skip the step and report it; the run continues.
pub fn update(
    net: &mut PolicyNet,
    opt: &mut Adam,
    buf: &TrajectoryBuffer,
    hyper: &PpoHyper,
) -> LossStats {
    let adv = compute_gae(buf, hyper.gamma, hyper.lam);
    let (adv_mean, adv_std) = adv_moments(&adv, buf);
    let mut last = LossStats::default();
    for epoch in 0..hyper.epochs {
        let (stats, mut grad, total) = loss_and_grad(net, buf, &adv, adv_mean, adv_std, hyper);
        last = stats;
        last.epochs_run = epoch + 1;
        if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            log::warn!("non-finite loss at epoch {epoch}; update skipped");
            last.epochs_run = epoch;
            break;
        }
        if epoch > 0 && stats.approx_kl > hyper.kl_threshold {
            // Halt before applying this epoch's step.
            last.epochs_run = epoch;
            break;
        }
        let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > hyper.max_grad_norm {
            let s = hyper.max_grad_norm / norm;
            for g in &mut grad {
                *g *= s;
            }
        }
        opt.apply(&mut net.params, &grad);
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetShape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_net(seed: u64) -> PolicyNet {
        let shape = NetShape {
            obs_dim: 2,
            act_dim: 1,
            hidden: (1, 1),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PolicyNet::new(shape, &mut rng)
    }

    fn buffer_from(
        net: &PolicyNet,
        transitions: &[(Vec<f64>, f64, f64, bool, bool)],
    ) -> TrajectoryBuffer {
        // Each transition: (obs, action, reward, done, mask); one env,
        // horizon = transitions.len().
        let mut buf = TrajectoryBuffer {
            n_envs: 1,
            obs_dim: net.shape.obs_dim,
            act_dim: net.shape.act_dim,
            horizon: transitions.len(),
            last_values: vec![0.0],
            ..Default::default()
        };
        for (obs, action, reward, done, mask) in transitions {
            let f = net.forward(obs);
            let lp = gaussian_log_prob(&f.mean, &f.log_std, &[*action]);
            buf.obs.push(obs.clone());
            buf.actions.push(vec![*action]);
            buf.log_probs.push(vec![lp]);
            buf.values.push(vec![f.value]);
            buf.rewards.push(vec![*reward]);
            buf.dones.push(vec![*done]);
            buf.masks.push(vec![*mask]);
        }
        buf
    }

    #[test]
    fn zero_advantage_leaves_policy_params_unchanged() {
        // With constant rewards equal to the value estimates the
        // advantages vanish; with value and entropy terms switched off
        // the surrogate gradient is exactly zero.
        let net = tiny_net(1);
        let mut work = net.clone();
        let transitions: Vec<_> = (0..4)
            .map(|k| (vec![k as f64 * 0.1, -0.2], 0.1 * k as f64, 0.0, false, true))
            .collect();
        let mut buf = buffer_from(&net, &transitions);
        // Force zero advantage: rewards chosen so delta == 0 each step.
        for t in 0..4 {
            let next = if t + 1 == 4 { buf.last_values[0] } else { buf.values[t + 1][0] };
            buf.rewards[t][0] = buf.values[t][0] - 0.99 * next;
        }
        let hyper = PpoHyper {
            value_coef: 0.0,
            entropy_coef: 0.0,
            gamma: 0.99,
            ..Default::default()
        };
        let mut opt = Adam::new(net.params.len(), 1e-2);
        update(&mut work, &mut opt, &buf, &hyper);
        for (a, b) in net.params.iter().zip(work.params.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn positive_advantage_increases_log_prob() {
        let net = tiny_net(2);
        let mut work = net.clone();
        let obs = vec![0.5, -0.3];
        let action = 0.7;
        // Two independent episodes with opposed rewards so advantage
        // normalization leaves a genuine signal: push toward `action`,
        // away from the second draw.
        let buf = buffer_from(
            &net,
            &[
                (obs.clone(), action, 5.0, true, true),
                (vec![-0.5, 0.3], -0.4, -5.0, true, true),
            ],
        );
        let hyper = PpoHyper {
            value_coef: 0.0,
            entropy_coef: 0.0,
            epochs: 1,
            ..Default::default()
        };
        let f0 = net.forward(&obs);
        let lp_before = gaussian_log_prob(&f0.mean, &f0.log_std, &[action]);
        let mut opt = Adam::new(net.params.len(), 1e-3);
        update(&mut work, &mut opt, &buf, &hyper);
        let f1 = work.forward(&obs);
        let lp_after = gaussian_log_prob(&f1.mean, &f1.log_std, &[action]);
        assert!(lp_after > lp_before, "{lp_after} vs {lp_before}");
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        // Frozen tiny network (9 parameters) and a 4-transition buffer:
        // the full PPO loss gradient against central differences.
        let net = tiny_net(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let transitions: Vec<_> = (0..4)
            .map(|_| {
                (
                    vec![rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5],
                    rng.gen::<f64>() * 2.0 - 1.0,
                    rng.gen::<f64>(),
                    false,
                    true,
                )
            })
            .collect();
        let mut buf = buffer_from(&net, &transitions);
        // Make log_probs stale (as after one optimizer step) so the
        // ratio path is exercised.
        for lp in buf.log_probs.iter_mut() {
            lp[0] += 0.05;
        }
        let hyper = PpoHyper::default();
        let adv = compute_gae(&buf, hyper.gamma, hyper.lam);
        let (adv_mean, adv_std) = adv_moments(&adv, &buf);

        let (_, grad, _) = loss_and_grad(&net, &buf, &adv, adv_mean, adv_std, &hyper);
        let eps = 1e-6;
        for i in 0..net.params.len() {
            let mut plus = net.clone();
            plus.params[i] += eps;
            let mut minus = net.clone();
            minus.params[i] -= eps;
            let (_, _, lp) = loss_and_grad(&plus, &buf, &adv, adv_mean, adv_std, &hyper);
            let (_, _, lm) = loss_and_grad(&minus, &buf, &adv, adv_mean, adv_std, &hyper);
            let fd = (lp - lm) / (2.0 * eps);
            let denom = fd.abs().max(grad[i].abs()).max(1e-8);
            assert!(
                (fd - grad[i]).abs() / denom < 1e-4,
                "param {i}: analytic {} vs fd {fd}",
                grad[i]
            );
        }
    }

    #[test]
    fn masked_env_equals_absent_env() {
        // Losses computed with a dead env must equal losses with that
        // env absent entirely.
        let net = tiny_net(5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let horizon = 3;
        let mut with_dead = TrajectoryBuffer {
            n_envs: 2,
            obs_dim: 2,
            act_dim: 1,
            horizon,
            last_values: vec![0.3, 0.0],
            ..Default::default()
        };
        let mut alone = TrajectoryBuffer {
            n_envs: 1,
            obs_dim: 2,
            act_dim: 1,
            horizon,
            last_values: vec![0.3],
            ..Default::default()
        };
        for _ in 0..horizon {
            let obs_live = vec![rng.gen::<f64>(), rng.gen::<f64>()];
            let act_live = rng.gen::<f64>() - 0.5;
            let r_live = rng.gen::<f64>();
            let f = net.forward(&obs_live);
            let lp = gaussian_log_prob(&f.mean, &f.log_std, &[act_live]);
            // Env 1 is dead garbage that must not leak into the loss.
            with_dead.obs.push([obs_live.clone(), vec![9.9, -9.9]].concat());
            with_dead.actions.push(vec![act_live, 4.2]);
            with_dead.log_probs.push(vec![lp, -1.0]);
            with_dead.values.push(vec![f.value, 7.0]);
            with_dead.rewards.push(vec![r_live, 100.0]);
            with_dead.dones.push(vec![false, true]);
            with_dead.masks.push(vec![true, false]);

            alone.obs.push(obs_live);
            alone.actions.push(vec![act_live]);
            alone.log_probs.push(vec![lp]);
            alone.values.push(vec![f.value]);
            alone.rewards.push(vec![r_live]);
            alone.dones.push(vec![false]);
            alone.masks.push(vec![true]);
        }
        let hyper = PpoHyper::default();
        let adv_a = compute_gae(&with_dead, hyper.gamma, hyper.lam);
        let adv_b = compute_gae(&alone, hyper.gamma, hyper.lam);
        assert_eq!(adv_a.n_included, adv_b.n_included);
        let (ma, sa) = adv_moments(&adv_a, &with_dead);
        let (mb, sb) = adv_moments(&adv_b, &alone);
        assert_eq!(ma, mb);
        assert_eq!(sa, sb);
        let (_, ga, la) = loss_and_grad(&net, &with_dead, &adv_a, ma, sa, &hyper);
        let (_, gb, lb) = loss_and_grad(&net, &alone, &adv_b, mb, sb, &hyper);
        assert_eq!(la, lb);
        assert_eq!(ga, gb);
    }

    #[test]
    fn kl_guard_halts_epochs() {
        let net = tiny_net(8);
        let mut work = net.clone();
        let buf = buffer_from(
            &net,
            &[
                (vec![0.1, 0.9], 0.5, 3.0, false, true),
                (vec![-0.4, 0.2], -0.5, -3.0, false, true),
                (vec![0.8, -0.6], 0.2, 2.0, false, true),
                (vec![0.0, 0.0], -0.1, -2.0, true, true),
            ],
        );
        let hyper = PpoHyper {
            epochs: 50,
            kl_threshold: 1e-6,
            lr: 0.0, // unused; Adam lr is set below
            ..Default::default()
        };
        let mut opt = Adam::new(net.params.len(), 0.3);
        let stats = update(&mut work, &mut opt, &buf, &hyper);
        assert!(stats.epochs_run < 50, "KL guard never fired: {stats:?}");
    }
}
