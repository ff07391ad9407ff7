//! The paper's metric family, scaled to the toy task.

use polysim_sim::{
    PhysicalSpec, ReferenceTrajectory, Router, RouterConfig, RouterGroupConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::TrainerError;
use crate::net::PolicyNet;

/// Episode fails when the joint tracking error exceeds this fraction of
/// the reference amplitude at any step (the 0.5 m analogue, scaled).
pub const FAILURE_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackingMetrics {
    /// Success rate over episodes in [0, 1].
    pub succ: f64,
    /// Mean global tip position error, m (E_g-mpjpe analogue).
    pub e_pos: f64,
    /// Mean root-relative tip error, m (E_mpjpe analogue).
    pub e_rel: f64,
    /// Mean |acceleration error|, m/frame^2.
    pub e_acc: f64,
    /// Mean |velocity error|, m/frame.
    pub e_vel: f64,
    pub episodes: usize,
}

/// Tip positions from a unified observation: global (x, y) includes base
/// height; root-relative measures the arm alone. The arm hangs from the
/// base, so the tip sits at (l sin th, z - l cos th) with the reference
/// evaluated at base height 0.
fn tip_positions(obs: &[f64], arm_length: f64) -> ((f64, f64), (f64, f64)) {
    let theta = obs[0];
    let z = obs[2];
    let global = (arm_length * theta.sin(), z - arm_length * theta.cos());
    let rel = (arm_length * theta.sin(), -arm_length * theta.cos());
    (global, rel)
}

fn ref_tip(theta_ref: f64, arm_length: f64) -> (f64, f64) {
    (arm_length * theta_ref.sin(), -arm_length * theta_ref.cos())
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Deterministic closed-loop evaluation of a policy on one backend:
/// mean-action control, `episodes` episodes of `horizon` steps each.
pub fn evaluate(
    net: &PolicyNet,
    backend: &str,
    spec: &PhysicalSpec,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<TrackingMetrics, TrainerError> {
    let reference = ReferenceTrajectory::by_id(&spec.reference_id)?;
    let threshold = FAILURE_FRACTION * reference.amplitude;
    let arm_length = spec.arm_length();
    let mut agg = TrackingMetrics {
        episodes,
        ..Default::default()
    };
    let mut succ_count = 0usize;

    for ep in 0..episodes {
        let cfg = RouterConfig {
            groups: vec![RouterGroupConfig {
                backend: backend.into(),
                env_count: 1,
                seed_base: seed.wrapping_mul(1000).wrapping_add(ep as u64),
            }],
            init_noise: 0.05,
            reward: None,
        };
        let mut router = Router::new(spec, &cfg)?;
        let mut batch = router.reset(seed.wrapping_add(ep as u64));

        let mut failed = false;
        let mut rel_errs: Vec<f64> = Vec::with_capacity(horizon);
        let (mut e_pos_sum, mut e_rel_sum) = (0.0, 0.0);
        let mut steps = 0usize;
        for _ in 0..horizon {
            if !batch.mask[0] {
                failed = true; // divergence counts as failure
                break;
            }
            let obs = batch.obs_row(0).to_vec();
            let fwd = net.forward(&obs);
            let action: Vec<f64> = fwd.mean.iter().map(|m| m.tanh()).collect();
            batch = router.vector_step(&action)?;
            if !batch.mask[0] {
                failed = true;
                break;
            }
            let obs = batch.obs_row(0);
            let theta_err = (obs[0] - obs[5]).abs();
            if theta_err > threshold {
                failed = true;
            }
            let (global, rel) = tip_positions(obs, arm_length);
            let target = ref_tip(obs[5], arm_length);
            e_pos_sum += dist(global, target);
            e_rel_sum += dist(rel, target);
            rel_errs.push(dist(rel, target));
            steps += 1;
        }
        if steps == 0 {
            continue;
        }
        if !failed {
            succ_count += 1;
        }
        agg.e_pos += e_pos_sum / steps as f64;
        agg.e_rel += e_rel_sum / steps as f64;
        // Velocity/acceleration errors from finite differences of the
        // per-frame tracking error.
        let vel: Vec<f64> = rel_errs.windows(2).map(|w| w[1] - w[0]).collect();
        if !vel.is_empty() {
            agg.e_vel += vel.iter().map(|v| v.abs()).sum::<f64>() / vel.len() as f64;
        }
        let acc: Vec<f64> = vel.windows(2).map(|w| w[1] - w[0]).collect();
        if !acc.is_empty() {
            agg.e_acc += acc.iter().map(|a| a.abs()).sum::<f64>() / acc.len() as f64;
        }
    }
    let n = episodes.max(1) as f64;
    agg.succ = succ_count as f64 / n;
    agg.e_pos /= n;
    agg.e_rel /= n;
    agg.e_vel /= n;
    agg.e_acc /= n;
    Ok(agg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetShape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_net(seed: u64) -> PolicyNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PolicyNet::new(
            NetShape {
                obs_dim: polysim_sim::UNIFIED_OBS_LEN,
                act_dim: 1,
                hidden: (16, 16),
            },
            &mut rng,
        )
    }

    #[test]
    fn untrained_policy_fails_at_default_threshold() {
        let net = random_net(4);
        let spec = PhysicalSpec::default();
        let m = evaluate(&net, "A", &spec, 5, 200, 1).unwrap();
        assert_eq!(m.succ, 0.0, "{m:?}");
        assert!(m.e_pos > 0.0 && m.e_rel > 0.0);
    }

    #[test]
    fn evaluation_deterministic_bitwise() {
        let net = random_net(5);
        let spec = PhysicalSpec::default();
        let a = evaluate(&net, "D", &spec, 3, 100, 7).unwrap();
        let b = evaluate(&net, "D", &spec, 3, 100, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn metrics_nonnegative() {
        let net = random_net(6);
        let spec = PhysicalSpec::default();
        for backend in ["A", "B", "C", "D"] {
            let m = evaluate(&net, backend, &spec, 2, 60, 3).unwrap();
            assert!(m.e_pos >= 0.0 && m.e_rel >= 0.0 && m.e_acc >= 0.0 && m.e_vel >= 0.0);
            assert!((0.0..=1.0).contains(&m.succ));
        }
    }
}
