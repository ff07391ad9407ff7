//! Sim-to-real gaps and the mixture-kernel bound checks.
//!
//! Everything here is exact: policy classes are materialized, suprema are
//! taken by enumeration, and transport distances come from the exact solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::kernel::{
    hull_distance, kernel_distance, lift_kernel, mix_kernels, HullSolverConfig, HullSolutionT,
    KernelT, LiftedKernelT, StateLifting,
};
use crate::mdp::{
    discounted_return_with_kernel, enumerate_policy_class, lipschitz_constant, value_function,
    FiniteMdpT, MetricSpaceT, PolicyClassKind, PolicyClassT, PolicyT,
};
use crate::scalar::Real;

/// Worst-case return difference between the real kernel and a simulator kernel
/// over an explicit policy class, with the maximizing policy as witness.
pub fn s2r_gap<R: Real>(
    real_mdp: &FiniteMdpT<R>,
    sim_kernel: &KernelT<R>,
    policy_class: &PolicyClassT<R>,
) -> Result<(R, usize), CoreError> {
    if policy_class.is_empty() {
        return Err(CoreError::EmptyPolicyClass);
    }
    if sim_kernel.n_states() != real_mdp.n_states()
        || sim_kernel.n_actions() != real_mdp.n_actions
    {
        return Err(CoreError::ShapeMismatch("sim kernel vs real MDP".into()));
    }
    let mut best = R::neg_infinity();
    let mut witness = 0usize;
    for (idx, pi) in policy_class.members.iter().enumerate() {
        let eta_real = discounted_return_with_kernel(real_mdp, &real_mdp.kernel, pi)?;
        let eta_sim = discounted_return_with_kernel(real_mdp, sim_kernel, pi)?;
        let diff = (eta_real - eta_sim).abs();
        if diff > best {
            best = diff;
            witness = idx;
        }
    }
    Ok((best, witness))
}

/// Largest Lipschitz constant of the real value function over the class.
pub fn sup_lipschitz<R: Real>(
    real_mdp: &FiniteMdpT<R>,
    policy_class: &PolicyClassT<R>,
) -> Result<R, CoreError> {
    let mut sup = R::zero();
    for pi in &policy_class.members {
        let v = value_function(real_mdp, pi)?;
        let l = lipschitz_constant(&v, &real_mdp.states);
        if l > sup {
            sup = l;
        }
    }
    Ok(sup)
}

/// One bound check: gap vs `gamma/(1-gamma) * L_V * Delta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck<R> {
    pub gap: R,
    pub delta: R,
    pub l_v: R,
    pub constant: R,
    pub bound: R,
    pub slack: R,
    pub violated: bool,
    pub gap_witness: usize,
    pub delta_witness: (usize, usize),
}

pub const BOUND_SLACK_TOL: f64 = 1e-9;

/// Checks the single-simulator bound for one lifted kernel.
pub fn verify_lemma1<R: Real>(
    real_mdp: &FiniteMdpT<R>,
    lifted: &LiftedKernelT<R>,
    policy_class: &PolicyClassT<R>,
) -> Result<BoundCheck<R>, CoreError> {
    let (gap, gap_witness) = s2r_gap(real_mdp, &lifted.lifted, policy_class)?;
    let (delta, delta_witness) =
        kernel_distance(&real_mdp.kernel, &lifted.lifted, &real_mdp.states)?;
    let l_v = sup_lipschitz(real_mdp, policy_class)?;
    let constant = real_mdp.gamma / (R::one() - real_mdp.gamma) * l_v;
    let bound = constant * delta;
    let slack = bound - gap;
    Ok(BoundCheck {
        gap,
        delta,
        l_v,
        constant,
        bound,
        slack,
        violated: gap > bound + R::c(BOUND_SLACK_TOL),
        gap_witness,
        delta_witness,
    })
}

/// Value-gap bound for a single policy: `|eta_T0 - eta_Q| <= C * sup W1`.
pub fn value_gap_bound<R: Real>(
    real_mdp: &FiniteMdpT<R>,
    q_kernel: &KernelT<R>,
    policy: &PolicyT<R>,
) -> Result<(R, R), CoreError> {
    let eta_real = discounted_return_with_kernel(real_mdp, &real_mdp.kernel, policy)?;
    let eta_q = discounted_return_with_kernel(real_mdp, q_kernel, policy)?;
    let lhs = (eta_real - eta_q).abs();
    let v = value_function(real_mdp, policy)?;
    let l_v = lipschitz_constant(&v, &real_mdp.states);
    let (delta, _) = kernel_distance(&real_mdp.kernel, q_kernel, &real_mdp.states)?;
    let rhs = real_mdp.gamma / (R::one() - real_mdp.gamma) * l_v * delta;
    Ok((lhs, rhs))
}

/// Full mixture-vs-vertices report for one instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapReportT<R> {
    /// Per-simulator gap G_i and its witness policy index.
    pub per_sim_gap: Vec<R>,
    pub per_sim_gap_witness: Vec<usize>,
    /// Per-simulator worst-row kernel distance Delta_i.
    pub per_sim_delta: Vec<R>,
    pub l_v: R,
    /// `gamma * L_V / (1 - gamma)`.
    pub constant: R,
    pub eps_hull: R,
    pub w_star: Vec<R>,
    /// Gap of the mixture at the distance-minimizing weights.
    pub mixture_gap: R,
    pub mixture_gap_witness: usize,
    /// Gap of the uniform mixture, reported alongside.
    pub uniform_gap: R,
    /// Whether `eps_hull < min_i Delta_i` (the proof's assumption).
    pub hull_condition_holds: bool,
    /// Whether `G_Q <= min_i G_i + tol` held on this instance.
    pub mixture_no_worse: bool,
    pub solver_iterations: usize,
    pub solver_budget_exhausted: bool,
}

/// Computes per-component gaps, the hull distance, and the mixture gaps at
/// both the distance-minimizing and the uniform weights.
pub fn verify_theorem1<R: Real>(
    real_mdp: &FiniteMdpT<R>,
    components: &[LiftedKernelT<R>],
    policy_class: &PolicyClassT<R>,
    solver: &HullSolverConfig,
) -> Result<GapReportT<R>, CoreError> {
    if components.len() < 2 {
        return Err(CoreError::ShapeMismatch(
            "theorem check needs >= 2 components".into(),
        ));
    }
    let mut per_sim_gap = Vec::new();
    let mut per_sim_gap_witness = Vec::new();
    let mut per_sim_delta = Vec::new();
    for c in components {
        let (g, wit) = s2r_gap(real_mdp, &c.lifted, policy_class)?;
        per_sim_gap.push(g);
        per_sim_gap_witness.push(wit);
        let (d, _) = kernel_distance(&real_mdp.kernel, &c.lifted, &real_mdp.states)?;
        per_sim_delta.push(d);
    }
    let l_v = sup_lipschitz(real_mdp, policy_class)?;
    let constant = real_mdp.gamma / (R::one() - real_mdp.gamma) * l_v;

    let (hull, budget_exhausted): (HullSolutionT<R>, bool) =
        match hull_distance(&real_mdp.kernel, components, &real_mdp.states, solver) {
            Ok(sol) => (sol, false),
            Err(CoreError::BudgetExhausted { iterations, best }) => (
                HullSolutionT {
                    eps_hull: R::c(best),
                    weights: vec![R::one() / R::c(components.len() as f64); components.len()],
                    witness: (0, 0),
                    iterations,
                },
                true,
            ),
            Err(e) => return Err(e),
        };

    let mix_star = mix_kernels(components, &hull.weights)?;
    let (mixture_gap, mixture_gap_witness) = s2r_gap(real_mdp, &mix_star.mixed, policy_class)?;
    let uniform_w = vec![R::one() / R::c(components.len() as f64); components.len()];
    let mix_uni = mix_kernels(components, &uniform_w)?;
    let (uniform_gap, _) = s2r_gap(real_mdp, &mix_uni.mixed, policy_class)?;

    let min_delta = per_sim_delta
        .iter()
        .copied()
        .fold(R::infinity(), |a, b| a.min(b));
    let min_gap = per_sim_gap
        .iter()
        .copied()
        .fold(R::infinity(), |a, b| a.min(b));

    Ok(GapReportT {
        per_sim_gap,
        per_sim_gap_witness,
        per_sim_delta,
        l_v,
        constant,
        eps_hull: hull.eps_hull,
        w_star: hull.weights,
        mixture_gap,
        mixture_gap_witness,
        uniform_gap,
        hull_condition_holds: hull.eps_hull < min_delta,
        mixture_no_worse: mixture_gap <= min_gap + R::c(BOUND_SLACK_TOL),
        solver_iterations: hull.iterations,
        solver_budget_exhausted: budget_exhausted,
    })
}

// ---------------------------------------------------------------------------
// Seeded random instances and the verification batch.
// ---------------------------------------------------------------------------

/// Parameters for one random verification instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceParams {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub n_components: usize,
    /// Mix real dynamics into each simulator kernel by this amount; closer to
    /// one keeps simulators near the real kernel.
    pub sim_closeness: f64,
    /// Allow coarsening liftings (sim state spaces smaller than the real one).
    pub allow_coarsening: bool,
}

impl Default for InstanceParams {
    fn default() -> Self {
        Self {
            n_states: 5,
            n_actions: 2,
            gamma: 0.9,
            n_components: 3,
            sim_closeness: 0.5,
            allow_coarsening: true,
        }
    }
}

pub fn random_distribution(rng: &mut ChaCha8Rng, n: usize, conc: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| (-(1.0 - rng.gen::<f64>()).ln()).powf(1.0 / conc.max(0.05)))
        .collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    let s: f64 = v.iter().sum();
    v[n - 1] += 1.0 - s;
    v
}

pub fn random_metric_space(rng: &mut ChaCha8Rng, n: usize) -> MetricSpaceT<f64> {
    // Random points on a line with jittered spacing; line metrics satisfy the
    // triangle inequality by construction.
    let mut coords = vec![0.0f64];
    for _ in 1..n {
        coords.push(coords.last().unwrap() + 0.2 + rng.gen::<f64>());
    }
    MetricSpaceT::line(&coords).expect("line metric")
}

pub fn random_kernel_f64(rng: &mut ChaCha8Rng, n: usize, n_a: usize, conc: f64) -> KernelT<f64> {
    let mut probs = Vec::with_capacity(n * n_a * n);
    for _ in 0..n * n_a {
        probs.extend(random_distribution(rng, n, conc));
    }
    KernelT::new(n, n_a, probs).expect("random kernel")
}

/// One seeded random real MDP.
pub fn random_instance_mdp(rng: &mut ChaCha8Rng, p: &InstanceParams) -> FiniteMdpT<f64> {
    let space = random_metric_space(rng, p.n_states);
    let kernel = random_kernel_f64(rng, p.n_states, p.n_actions, 1.0);
    let reward: Vec<f64> = (0..p.n_states * p.n_actions)
        .map(|_| rng.gen::<f64>())
        .collect();
    let start = random_distribution(rng, p.n_states, 1.0);
    FiniteMdpT::new(space, p.n_actions, kernel, reward, p.gamma, start).expect("random MDP")
}

/// A seeded simulator for a real MDP: random lifting plus a kernel biased
/// toward the real dynamics by `sim_closeness`.
pub fn random_component(
    rng: &mut ChaCha8Rng,
    real: &FiniteMdpT<f64>,
    p: &InstanceParams,
) -> LiftedKernelT<f64> {
    let n = real.n_states();
    let n_a = real.n_actions;
    let n_sim = if p.allow_coarsening && n > 2 && rng.gen::<f64>() < 0.3 {
        rng.gen_range(2..=n)
    } else {
        n
    };
    let lifting = if n_sim == n {
        StateLifting::identity(n)
    } else {
        let mut projection: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n_sim)).collect();
        for si in 0..n_sim {
            projection[si] = si; // first n_sim states are their own representatives
        }
        let section: Vec<usize> = (0..n_sim).collect();
        StateLifting::new(projection, section).expect("lifting")
    };
    let noise = random_kernel_f64(rng, n_sim, n_a, 1.0);
    // Blend projected real dynamics with noise, row-normalized exactly.
    let mut probs = Vec::with_capacity(n_sim * n_a * n_sim);
    for si in 0..n_sim {
        let s0 = lifting.embed(si);
        for a in 0..n_a {
            let mut row = vec![0.0f64; n_sim];
            for (s2, &pr) in real.kernel.row(s0, a).iter().enumerate() {
                row[lifting.project(s2)] += p.sim_closeness * pr;
            }
            for (s2, &pn) in noise.row(si, a).iter().enumerate() {
                row[s2] += (1.0 - p.sim_closeness) * pn;
            }
            let sum: f64 = row.iter().sum();
            for x in &mut row {
                *x /= sum;
            }
            let s: f64 = row.iter().sum();
            row[n_sim - 1] += 1.0 - s;
            probs.extend(row);
        }
    }
    let sim_kernel = KernelT::new(n_sim, n_a, probs).expect("sim kernel");
    lift_kernel(&sim_kernel, &lifting, n).expect("lift")
}

/// Materializes the policy class for an instance: exact enumeration when it
/// fits under the cap, otherwise a seeded stochastic sample.
pub fn instance_policy_class(
    mdp: &FiniteMdpT<f64>,
    cap: u128,
    sample_count: usize,
    seed: u64,
) -> Result<PolicyClassT<f64>, CoreError> {
    let required = (mdp.n_actions as u128).saturating_pow(mdp.n_states() as u32);
    if required <= cap {
        enumerate_policy_class(mdp, PolicyClassKind::AllDeterministic, seed, cap)
    } else {
        enumerate_policy_class(
            mdp,
            PolicyClassKind::SampledStochastic {
                count: sample_count,
            },
            seed,
            cap,
        )
    }
}

/// Result of one Lemma 1 instance in a batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lemma1Outcome {
    pub seed: u64,
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub check: BoundCheck<f64>,
    /// Full instance dump, present only on violation.
    pub violation_dump: Option<String>,
}

/// Runs the Lemma 1 suite over `n_seeds` random instances in parallel,
/// merging outcomes in seed order.
pub fn lemma1_batch(
    base_seed: u64,
    n_seeds: u64,
    max_states: usize,
    max_actions: usize,
    cap: u128,
) -> Vec<Result<Lemma1Outcome, String>> {
    (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = InstanceParams {
                n_states: rng.gen_range(2..=max_states),
                n_actions: rng.gen_range(1..=max_actions),
                gamma: if rng.gen::<bool>() { 0.9 } else { 0.99 },
                n_components: 1,
                sim_closeness: rng.gen::<f64>() * 0.8,
                allow_coarsening: true,
            };
            let mdp = random_instance_mdp(&mut rng, &params);
            let comp = random_component(&mut rng, &mdp, &params);
            let class = instance_policy_class(&mdp, cap, 64, seed)
                .map_err(|e| format!("seed {seed}: {e}"))?;
            let check =
                verify_lemma1(&mdp, &comp, &class).map_err(|e| format!("seed {seed}: {e}"))?;
            let violation_dump = if check.violated {
                Some(
                    crate::serialize::mdp_to_toml(&mdp)
                        .unwrap_or_else(|e| format!("dump failed: {e}")),
                )
            } else {
                None
            };
            Ok(Lemma1Outcome {
                seed,
                n_states: params.n_states,
                n_actions: params.n_actions,
                gamma: params.gamma,
                check,
                violation_dump,
            })
        })
        .collect()
}

/// Result of one Theorem 1 instance in a batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem1Outcome {
    pub seed: u64,
    pub constructed: bool,
    pub report: GapReportT<f64>,
    pub violation_dump: Option<String>,
}

/// Theorem 1 batch. `constructed` instances place the real kernel inside the
/// hull by building it as a strict mixture of the components.
pub fn theorem1_batch(
    base_seed: u64,
    n_seeds: u64,
    constructed: bool,
    max_states: usize,
    max_actions: usize,
    cap: u128,
    solver: &HullSolverConfig,
) -> Vec<Result<Theorem1Outcome, String>> {
    (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9).wrapping_add(7));
            let n_components = rng.gen_range(2..=3usize);
            let params = InstanceParams {
                n_states: rng.gen_range(3..=max_states),
                n_actions: rng.gen_range(1..=max_actions),
                gamma: if rng.gen::<bool>() { 0.9 } else { 0.99 },
                n_components,
                // Constructed instances need components on the full space so the
                // real kernel is exactly representable.
                sim_closeness: rng.gen::<f64>() * 0.6 + 0.3,
                allow_coarsening: !constructed,
            };
            let mut mdp = random_instance_mdp(&mut rng, &params);
            let comps: Vec<LiftedKernelT<f64>> = (0..n_components)
                .map(|_| random_component(&mut rng, &mdp, &params))
                .collect();
            if constructed {
                // Interior weights keep the optimum away from the vertices.
                let mut w = random_distribution(&mut rng, n_components, 1.0);
                let floor = 0.2 / n_components as f64;
                let mut sum = 0.0;
                for x in &mut w {
                    *x = *x * (1.0 - floor * n_components as f64) + floor;
                    sum += *x;
                }
                for x in &mut w {
                    *x /= sum;
                }
                let s: f64 = w.iter().sum();
                w[n_components - 1] += 1.0 - s;
                let mixed = mix_kernels(&comps, &w).map_err(|e| format!("seed {seed}: {e}"))?;
                mdp = mdp
                    .with_kernel(mixed.mixed)
                    .map_err(|e| format!("seed {seed}: {e}"))?;
            }
            let class = instance_policy_class(&mdp, cap, 64, seed)
                .map_err(|e| format!("seed {seed}: {e}"))?;
            let report = verify_theorem1(&mdp, &comps, &class, solver)
                .map_err(|e| format!("seed {seed}: {e}"))?;
            let bad = if constructed {
                !report.mixture_no_worse || report.eps_hull > solver.tolerance
            } else {
                report.hull_condition_holds && !report.mixture_no_worse
            };
            let violation_dump = if bad {
                Some(
                    crate::serialize::mdp_to_toml(&mdp)
                        .unwrap_or_else(|e| format!("dump failed: {e}")),
                )
            } else {
                None
            };
            Ok(Theorem1Outcome {
                seed,
                constructed,
                report,
                violation_dump,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::DEFAULT_ENUM_CAP;

    fn small_instance(seed: u64) -> (FiniteMdpT<f64>, LiftedKernelT<f64>, PolicyClassT<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = InstanceParams {
            n_states: 4,
            n_actions: 2,
            gamma: 0.9,
            ..Default::default()
        };
        let mdp = random_instance_mdp(&mut rng, &params);
        let comp = random_component(&mut rng, &mdp, &params);
        let class = instance_policy_class(&mdp, DEFAULT_ENUM_CAP, 32, seed).unwrap();
        (mdp, comp, class)
    }

    #[test]
    fn identical_dynamics_zero_gap() {
        let (mdp, _, class) = small_instance(1);
        let (gap, _) = s2r_gap(&mdp, &mdp.kernel, &class).unwrap();
        assert_eq!(gap, 0.0);
    }

    #[test]
    fn zero_reward_zero_gap() {
        let (mut mdp, comp, class) = small_instance(2);
        mdp.reward.iter_mut().for_each(|r| *r = 0.0);
        let (gap, _) = s2r_gap(&mdp, &comp.lifted, &class).unwrap();
        assert!(gap.abs() < 1e-12);
    }

    #[test]
    fn gap_matches_direct_enumeration() {
        let (mdp, comp, class) = small_instance(3);
        let (gap, wit) = s2r_gap(&mdp, &comp.lifted, &class).unwrap();
        let mut brute = 0.0f64;
        let mut brute_wit = 0usize;
        for (i, pi) in class.members.iter().enumerate() {
            let d = (discounted_return_with_kernel(&mdp, &mdp.kernel, pi).unwrap()
                - discounted_return_with_kernel(&mdp, &comp.lifted, pi).unwrap())
            .abs();
            if d > brute {
                brute = d;
                brute_wit = i;
            }
        }
        assert!((gap - brute).abs() < 1e-12);
        assert_eq!(wit, brute_wit);
    }

    #[test]
    fn gap_monotone_under_class_inclusion() {
        let (mdp, comp, class) = small_instance(4);
        let (full_gap, _) = s2r_gap(&mdp, &comp.lifted, &class).unwrap();
        let sub = PolicyClassT {
            kind: class.kind,
            members: class.members[..class.len() / 2].to_vec(),
        };
        let (sub_gap, _) = s2r_gap(&mdp, &comp.lifted, &sub).unwrap();
        assert!(sub_gap <= full_gap + 1e-15);
    }

    #[test]
    fn gap_scales_linearly_with_reward() {
        let (mdp, comp, class) = small_instance(5);
        let (gap, _) = s2r_gap(&mdp, &comp.lifted, &class).unwrap();
        let mut scaled = mdp.clone();
        scaled.reward.iter_mut().for_each(|r| *r *= 3.5);
        let (gap2, _) = s2r_gap(&scaled, &comp.lifted, &class).unwrap();
        assert!((gap2 - 3.5 * gap).abs() < 1e-9);
    }

    #[test]
    fn lemma1_identity_simulator_zero_slack() {
        let (mdp, _, class) = small_instance(6);
        let ident = lift_kernel(
            &mdp.kernel,
            &StateLifting::identity(mdp.n_states()),
            mdp.n_states(),
        )
        .unwrap();
        let check = verify_lemma1(&mdp, &ident, &class).unwrap();
        assert!(check.gap.abs() < 1e-12);
        assert!(check.delta.abs() < 1e-12);
        assert!(!check.violated);
    }

    #[test]
    fn lemma1_engineered_point_mass_instance() {
        // Two states at distance 2, deterministic kernels differing at state 0:
        // real stays, sim jumps. Linear reward in state index gives linear V.
        let space = MetricSpaceT::line(&[0.0, 2.0]).unwrap();
        let real_kernel = KernelT::new(2, 1, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let sim_kernel = KernelT::new(2, 1, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let mdp = FiniteMdpT::new(
            space,
            1,
            real_kernel,
            vec![0.0, 2.0],
            0.9,
            vec![1.0, 0.0],
        )
        .unwrap();
        let lifted = lift_kernel(&sim_kernel, &StateLifting::identity(2), 2).unwrap();
        let class = instance_policy_class(&mdp, DEFAULT_ENUM_CAP, 8, 0).unwrap();
        let check = verify_lemma1(&mdp, &lifted, &class).unwrap();
        assert!((check.delta - 2.0).abs() < 1e-12);
        assert!(check.slack >= -BOUND_SLACK_TOL);
        assert!(!check.violated);
    }

    #[test]
    fn lemma1_small_batch_no_violations() {
        let outcomes = lemma1_batch(1000, 25, 5, 2, DEFAULT_ENUM_CAP);
        for o in outcomes {
            let o = o.expect("instance");
            assert!(!o.check.violated, "seed {} violated", o.seed);
        }
    }

    #[test]
    fn value_gap_bound_holds() {
        let (mdp, comp, class) = small_instance(7);
        // q = T0 gives (0, 0).
        let (l0, r0) = value_gap_bound(&mdp, &mdp.kernel, &class.members[0]).unwrap();
        assert!(l0.abs() < 1e-12 && r0.abs() < 1e-12);
        for pi in class.members.iter().take(16) {
            let (lhs, rhs) = value_gap_bound(&mdp, &comp.lifted, pi).unwrap();
            assert!(lhs <= rhs + 1e-9, "{lhs} > {rhs}");
        }
    }

    #[test]
    fn value_gap_bound_seeded_batch() {
        for seed in 0..100 {
            let (mdp, comp, class) = small_instance(100 + seed);
            let (lhs, rhs) = value_gap_bound(&mdp, &comp.lifted, &class.members[0]).unwrap();
            assert!(lhs <= rhs + 1e-9, "seed {seed}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn theorem1_constructed_mixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params = InstanceParams {
            n_states: 4,
            n_actions: 2,
            gamma: 0.9,
            allow_coarsening: false,
            ..Default::default()
        };
        let base = random_instance_mdp(&mut rng, &params);
        let comps: Vec<_> = (0..2).map(|_| random_component(&mut rng, &base, &params)).collect();
        let mixed = mix_kernels(&comps, &[0.4, 0.6]).unwrap();
        let mdp = base.with_kernel(mixed.mixed).unwrap();
        let class = instance_policy_class(&mdp, DEFAULT_ENUM_CAP, 32, 8).unwrap();
        let cfg = HullSolverConfig::default();
        let report = verify_theorem1(&mdp, &comps, &class, &cfg).unwrap();
        assert!(report.eps_hull <= cfg.tolerance, "{}", report.eps_hull);
        assert!(report.mixture_gap <= report.constant * cfg.tolerance + 1e-9);
        assert!(report.mixture_no_worse);
    }

    #[test]
    fn theorem1_equal_components_degenerate() {
        let (mdp, comp, class) = small_instance(9);
        let comps = vec![comp.clone(), comp.clone()];
        let report =
            verify_theorem1(&mdp, &comps, &class, &HullSolverConfig::default()).unwrap();
        assert!((report.mixture_gap - report.per_sim_gap[0]).abs() < 1e-9);
        assert!((report.per_sim_gap[0] - report.per_sim_gap[1]).abs() < 1e-12);
    }

    #[test]
    fn theorem1_eps_hull_never_exceeds_min_delta() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
            let params = InstanceParams {
                n_states: 4,
                n_actions: 2,
                gamma: 0.9,
                ..Default::default()
            };
            let mdp = random_instance_mdp(&mut rng, &params);
            let comps: Vec<_> = (0..3)
                .map(|_| random_component(&mut rng, &mdp, &params))
                .collect();
            let class = instance_policy_class(&mdp, DEFAULT_ENUM_CAP, 32, seed).unwrap();
            let report =
                verify_theorem1(&mdp, &comps, &class, &HullSolverConfig::default()).unwrap();
            let min_delta = report
                .per_sim_delta
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            assert!(report.eps_hull <= min_delta + 1e-9);
        }
    }
}
