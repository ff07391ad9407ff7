use polysim_sim::PhysicalSpec;
use polysim_trainer::{train, RunRegime, TrainerConfig};

/// End-to-end smoke: a short single-backend run must lift mean reward
/// measurably above its starting level. This is a learning check, not a
/// benchmark; thresholds are loose on purpose.
#[test]
fn reward_improves_on_single_backend() {
    let mut cfg = TrainerConfig::quick(PhysicalSpec::default(), RunRegime::Single("A".into()));
    cfg.iterations = 30;
    cfg.horizon = 128;
    cfg.envs_per_backend = 8;
    cfg.hidden = (32, 32);
    cfg.seed = 7;
    let out = train(&cfg).expect("training run");

    let early: f64 = out.logs[..3].iter().map(|l| l.mean_reward).sum::<f64>() / 3.0;
    let late: f64 = out.logs[out.logs.len() - 3..]
        .iter()
        .map(|l| l.mean_reward)
        .sum::<f64>()
        / 3.0;
    assert!(
        late > early + 0.05,
        "no learning signal: early {early:.4}, late {late:.4}"
    );
}

/// The same config and seed must reproduce the identical parameter
/// vector: training is deterministic end to end.
#[test]
fn training_is_deterministic() {
    let mut cfg = TrainerConfig::quick(PhysicalSpec::default(), RunRegime::Single("B".into()));
    cfg.iterations = 4;
    cfg.horizon = 32;
    cfg.envs_per_backend = 4;
    cfg.seed = 13;
    let a = train(&cfg).expect("run a");
    let b = train(&cfg).expect("run b");
    assert_eq!(a.net.params, b.net.params);
}
