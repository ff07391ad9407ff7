//! Text serialization of MDP instances (TOML).
//!
//! The exact field names are documented in `docs/FORMATS.md`. Kernels are
//! stored as sparse `(state, action, next, prob)` quadruples; omitted entries
//! are zero.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::kernel::KernelT;
use crate::mdp::{FiniteMdpT, MetricSpaceT};

#[derive(Debug, Serialize, Deserialize)]
struct MdpDoc {
    format: String,
    version: u32,
    gamma: f64,
    actions: usize,
    states: StatesDoc,
    start: Vec<f64>,
    kernel: Vec<KernelEntry>,
    reward: Vec<RewardEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StatesDoc {
    labels: Vec<String>,
    /// Full distance matrix, one row per state.
    metric: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct KernelEntry {
    state: usize,
    action: usize,
    next: usize,
    prob: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RewardEntry {
    state: usize,
    action: usize,
    value: f64,
}

pub const MDP_FORMAT: &str = "polysim-mdp";
pub const MDP_FORMAT_VERSION: u32 = 1;

pub fn mdp_to_toml(mdp: &FiniteMdpT<f64>) -> Result<String, CoreError> {
    let n = mdp.n_states();
    let doc = MdpDoc {
        format: MDP_FORMAT.to_string(),
        version: MDP_FORMAT_VERSION,
        gamma: mdp.gamma,
        actions: mdp.n_actions,
        states: StatesDoc {
            labels: mdp.states.labels().to_vec(),
            metric: (0..n)
                .map(|i| (0..n).map(|j| mdp.states.dist(i, j)).collect())
                .collect(),
        },
        start: mdp.start.clone(),
        kernel: (0..n)
            .flat_map(|s| {
                let mdp = &mdp;
                (0..mdp.n_actions).flat_map(move |a| {
                    mdp.kernel
                        .row(s, a)
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p != 0.0)
                        .map(move |(next, &prob)| KernelEntry {
                            state: s,
                            action: a,
                            next,
                            prob,
                        })
                })
            })
            .collect(),
        reward: (0..n)
            .flat_map(|s| {
                let mdp = &mdp;
                (0..mdp.n_actions).map(move |a| RewardEntry {
                    state: s,
                    action: a,
                    value: mdp.reward_at(s, a),
                })
            })
            .collect(),
    };
    toml::to_string_pretty(&doc).map_err(|e| CoreError::Serialize(e.to_string()))
}

pub fn mdp_from_toml(text: &str) -> Result<FiniteMdpT<f64>, CoreError> {
    let doc: MdpDoc = toml::from_str(text).map_err(|e| CoreError::Serialize(e.to_string()))?;
    if doc.format != MDP_FORMAT {
        return Err(CoreError::Serialize(format!(
            "unknown format {:?}",
            doc.format
        )));
    }
    if doc.version != MDP_FORMAT_VERSION {
        return Err(CoreError::Serialize(format!(
            "unsupported version {}",
            doc.version
        )));
    }
    let n = doc.states.labels.len();
    let mut dist = Vec::with_capacity(n * n);
    if doc.states.metric.len() != n {
        return Err(CoreError::Serialize("metric row count".into()));
    }
    for row in &doc.states.metric {
        if row.len() != n {
            return Err(CoreError::Serialize("metric row length".into()));
        }
        dist.extend_from_slice(row);
    }
    let space = MetricSpaceT::new(doc.states.labels, dist)?;
    let mut probs = vec![0.0f64; n * doc.actions * n];
    for e in &doc.kernel {
        if e.state >= n || e.action >= doc.actions || e.next >= n {
            return Err(CoreError::Serialize(format!(
                "kernel entry out of range: ({}, {}, {})",
                e.state, e.action, e.next
            )));
        }
        probs[(e.state * doc.actions + e.action) * n + e.next] = e.prob;
    }
    let kernel = KernelT::new(n, doc.actions, probs)?;
    let mut reward = vec![0.0f64; n * doc.actions];
    for e in &doc.reward {
        if e.state >= n || e.action >= doc.actions {
            return Err(CoreError::Serialize("reward entry out of range".into()));
        }
        reward[e.state * doc.actions + e.action] = e.value;
    }
    FiniteMdpT::new(space, doc.actions, kernel, reward, doc.gamma, doc.start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::{random_instance_mdp, InstanceParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_preserves_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mdp = random_instance_mdp(&mut rng, &InstanceParams::default());
        let text = mdp_to_toml(&mdp).unwrap();
        let back = mdp_from_toml(&text).unwrap();
        assert_eq!(back.n_states(), mdp.n_states());
        assert_eq!(back.gamma, mdp.gamma);
        assert_eq!(back.start, mdp.start);
        assert_eq!(back.reward, mdp.reward);
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions {
                assert_eq!(back.kernel.row(s, a), mdp.kernel.row(s, a));
            }
        }
    }

    #[test]
    fn rejects_unknown_format() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mdp = random_instance_mdp(&mut rng, &InstanceParams::default());
        let text = mdp_to_toml(&mdp).unwrap().replace("polysim-mdp", "other");
        assert!(mdp_from_toml(&text).is_err());
    }
}
