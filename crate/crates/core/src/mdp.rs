//! Finite MDPs on metric state spaces and exact policy evaluation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::kernel::KernelT;
use crate::scalar::Real;

/// Default cap on the size of an exhaustively enumerated policy class.
pub const DEFAULT_ENUM_CAP: u128 = 4096;

/// A finite set of states with a metric on it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSpaceT<R> {
    labels: Vec<String>,
    /// Row-major `n x n` distance matrix.
    dist: Vec<R>,
}

impl<R: Real> MetricSpaceT<R> {
    pub fn new(labels: Vec<String>, dist: Vec<R>) -> Result<Self, CoreError> {
        let n = labels.len();
        if n == 0 {
            return Err(CoreError::InvalidMetric("empty state set".into()));
        }
        if dist.len() != n * n {
            return Err(CoreError::InvalidMetric(format!(
                "distance matrix has {} entries, expected {}",
                dist.len(),
                n * n
            )));
        }
        let space = Self { labels, dist };
        space.validate()?;
        Ok(space)
    }

    /// Uniform unit-distance metric (all off-diagonal distances 1).
    pub fn discrete(n: usize) -> Result<Self, CoreError> {
        let mut dist = vec![R::one(); n * n];
        for i in 0..n {
            dist[i * n + i] = R::zero();
        }
        Self::new((0..n).map(|i| format!("s{i}")).collect(), dist)
    }

    /// States placed at the given coordinates on a line, with |x_i - x_j| distances.
    pub fn line(coords: &[R]) -> Result<Self, CoreError> {
        let n = coords.len();
        let mut dist = vec![R::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = (coords[i] - coords[j]).abs();
            }
        }
        Self::new((0..n).map(|i| format!("s{i}")).collect(), dist)
    }

    fn validate(&self) -> Result<(), CoreError> {
        let n = self.len();
        for i in 0..n {
            if self.dist(i, i) != R::zero() {
                return Err(CoreError::InvalidMetric(format!("dist({i},{i}) != 0")));
            }
            for j in 0..n {
                let dij = self.dist(i, j);
                if !dij.is_finite() || dij < R::zero() {
                    return Err(CoreError::InvalidMetric(format!(
                        "dist({i},{j}) = {dij} not finite nonnegative"
                    )));
                }
                if i != j && dij <= R::zero() {
                    return Err(CoreError::InvalidMetric(format!(
                        "off-diagonal dist({i},{j}) must be positive"
                    )));
                }
                if (dij - self.dist(j, i)).abs() > R::validation_tol() {
                    return Err(CoreError::InvalidMetric(format!(
                        "dist({i},{j}) != dist({j},{i})"
                    )));
                }
            }
        }
        // Triangle inequality over all triples.
        let tol = R::validation_tol();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if self.dist(i, j) > self.dist(i, k) + self.dist(k, j) + tol {
                        return Err(CoreError::InvalidMetric(format!(
                            "triangle inequality violated at ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> R {
        self.dist[i * self.labels.len() + j]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dist_matrix(&self) -> &[R] {
        &self.dist
    }

    pub fn max_dist(&self) -> R {
        self.dist.iter().fold(R::zero(), |m, &d| m.max(d))
    }
}

/// Tabular MDP: metric state space, finite actions, kernel, reward, discount, start.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteMdpT<R> {
    pub states: MetricSpaceT<R>,
    pub n_actions: usize,
    pub kernel: KernelT<R>,
    /// Row-major `n_states x n_actions` reward table.
    pub reward: Vec<R>,
    pub gamma: R,
    pub start: Vec<R>,
}

impl<R: Real> FiniteMdpT<R> {
    pub fn new(
        states: MetricSpaceT<R>,
        n_actions: usize,
        kernel: KernelT<R>,
        reward: Vec<R>,
        gamma: R,
        start: Vec<R>,
    ) -> Result<Self, CoreError> {
        let n = states.len();
        if n_actions == 0 {
            return Err(CoreError::InvalidMdp("no actions".into()));
        }
        if kernel.n_states() != n || kernel.n_actions() != n_actions {
            return Err(CoreError::ShapeMismatch(format!(
                "kernel is {}x{}, MDP is {}x{}",
                kernel.n_states(),
                kernel.n_actions(),
                n,
                n_actions
            )));
        }
        kernel.validate()?;
        if reward.len() != n * n_actions {
            return Err(CoreError::InvalidMdp("reward table shape".into()));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(CoreError::InvalidMdp("non-finite reward".into()));
        }
        if !(gamma > R::zero() && gamma < R::one()) {
            return Err(CoreError::InvalidMdp(format!(
                "gamma {gamma} outside (0,1)"
            )));
        }
        check_distribution(&start, n).map_err(|e| CoreError::InvalidMdp(format!("start: {e}")))?;
        Ok(Self {
            states,
            n_actions,
            kernel,
            reward,
            gamma,
            start,
        })
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    #[inline]
    pub fn reward_at(&self, s: usize, a: usize) -> R {
        self.reward[s * self.n_actions + a]
    }

    /// Same MDP with the transition kernel swapped out (the simulator view:
    /// lifted dynamics, real rewards).
    pub fn with_kernel(&self, kernel: KernelT<R>) -> Result<Self, CoreError> {
        Self::new(
            self.states.clone(),
            self.n_actions,
            kernel,
            self.reward.clone(),
            self.gamma,
            self.start.clone(),
        )
    }
}

fn check_distribution<R: Real>(p: &[R], n: usize) -> Result<(), String> {
    if p.len() != n {
        return Err(format!("length {} != {}", p.len(), n));
    }
    let mut sum = R::zero();
    for &x in p {
        if !x.is_finite() || x < R::zero() {
            return Err(format!("entry {x} not a probability"));
        }
        sum = sum + x;
    }
    if (sum - R::one()).abs() > R::validation_tol() {
        return Err(format!("sums to {sum}"));
    }
    Ok(())
}

/// Stationary stochastic policy as a per-state distribution over actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyT<R> {
    n_actions: usize,
    /// Row-major `n_states x n_actions`.
    table: Vec<R>,
}

impl<R: Real> PolicyT<R> {
    pub fn new(n_states: usize, n_actions: usize, table: Vec<R>) -> Result<Self, CoreError> {
        if table.len() != n_states * n_actions {
            return Err(CoreError::InvalidPolicy("table shape".into()));
        }
        for s in 0..n_states {
            check_distribution(&table[s * n_actions..(s + 1) * n_actions], n_actions)
                .map_err(|e| CoreError::InvalidPolicy(format!("state {s}: {e}")))?;
        }
        Ok(Self { n_actions, table })
    }

    pub fn deterministic(n_states: usize, n_actions: usize, choices: &[usize]) -> Self {
        let mut table = vec![R::zero(); n_states * n_actions];
        for (s, &a) in choices.iter().enumerate() {
            table[s * n_actions + a] = R::one();
        }
        Self { n_actions, table }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = R::one() / R::c(n_actions as f64);
        Self {
            n_actions,
            table: vec![p; n_states * n_actions],
        }
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> R {
        self.table[s * self.n_actions + a]
    }

    pub fn n_states(&self) -> usize {
        self.table.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

/// Which policy class to materialize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyClassKind {
    AllDeterministic,
    SampledStochastic { count: usize },
}

/// Explicitly materialized policy class.
#[derive(Debug, Clone)]
pub struct PolicyClassT<R> {
    pub kind: PolicyClassKind,
    pub members: Vec<PolicyT<R>>,
}

impl<R: Real> PolicyClassT<R> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Materializes a policy class: every deterministic stationary policy exactly
/// once, or a seeded sample of Dirichlet(1,..,1) stochastic policies.
pub fn enumerate_policy_class<R: Real>(
    mdp: &FiniteMdpT<R>,
    kind: PolicyClassKind,
    seed: u64,
    cap: u128,
) -> Result<PolicyClassT<R>, CoreError> {
    let n = mdp.n_states();
    let n_a = mdp.n_actions;
    match kind {
        PolicyClassKind::AllDeterministic => {
            let required = (n_a as u128)
                .checked_pow(n as u32)
                .ok_or(CoreError::EnumerationCapExceeded {
                    required: u128::MAX,
                    cap,
                })?;
            if required > cap {
                return Err(CoreError::EnumerationCapExceeded { required, cap });
            }
            let mut members = Vec::with_capacity(required as usize);
            let mut choices = vec![0usize; n];
            loop {
                members.push(PolicyT::deterministic(n, n_a, &choices));
                // Mixed-radix increment, least significant state first.
                let mut s = 0;
                loop {
                    if s == n {
                        return Ok(PolicyClassT { kind, members });
                    }
                    choices[s] += 1;
                    if choices[s] < n_a {
                        break;
                    }
                    choices[s] = 0;
                    s += 1;
                }
            }
        }
        PolicyClassKind::SampledStochastic { count } => {
            if count == 0 {
                return Err(CoreError::EmptyPolicyClass);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut members = Vec::with_capacity(count);
            for _ in 0..count {
                let mut table = vec![R::zero(); n * n_a];
                for s in 0..n {
                    let row = dirichlet_flat::<R>(&mut rng, n_a);
                    table[s * n_a..(s + 1) * n_a].copy_from_slice(&row);
                }
                members.push(PolicyT::new(n, n_a, table)?);
            }
            Ok(PolicyClassT { kind, members })
        }
    }
}

/// Dirichlet(1,...,1) draw via normalized exponentials.
fn dirichlet_flat<R: Real>(rng: &mut ChaCha8Rng, k: usize) -> Vec<R> {
    use rand::Rng;
    let mut v: Vec<f64> = (0..k)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    // Renormalize exactly against the validation tolerance.
    let s2: f64 = v.iter().sum();
    v[k - 1] += 1.0 - s2;
    v.into_iter().map(R::c).collect()
}

/// Exact policy evaluation: solves `(I - gamma * P_pi) V = R_pi` directly.
pub fn value_function<R: Real>(
    mdp: &FiniteMdpT<R>,
    pi: &PolicyT<R>,
) -> Result<Vec<R>, CoreError> {
    value_function_with_kernel(mdp, &mdp.kernel, pi)
}

/// Policy evaluation with an arbitrary kernel substituted for the MDP's own
/// (rewards, discount, and start distribution are reused).
pub fn value_function_with_kernel<R: Real>(
    mdp: &FiniteMdpT<R>,
    kernel: &KernelT<R>,
    pi: &PolicyT<R>,
) -> Result<Vec<R>, CoreError> {
    let n = mdp.n_states();
    let n_a = mdp.n_actions;
    if kernel.n_states() != n || kernel.n_actions() != n_a {
        return Err(CoreError::ShapeMismatch("kernel vs MDP".into()));
    }
    if pi.n_states() != n || pi.n_actions() != n_a {
        return Err(CoreError::ShapeMismatch("policy vs MDP".into()));
    }
    // A = I - gamma * P_pi, b = R_pi
    let mut a = vec![R::zero(); n * n];
    let mut b = vec![R::zero(); n];
    for s in 0..n {
        a[s * n + s] = R::one();
        for act in 0..n_a {
            let w = pi.prob(s, act);
            if w == R::zero() {
                continue;
            }
            b[s] = b[s] + w * mdp.reward_at(s, act);
            let row = kernel.row(s, act);
            for (s2, &p) in row.iter().enumerate() {
                a[s * n + s2] = a[s * n + s2] - mdp.gamma * w * p;
            }
        }
    }
    solve_linear(&mut a, &mut b, n)?;
    Ok(b)
}

/// In-place Gaussian elimination with partial pivoting.
fn solve_linear<R: Real>(a: &mut [R], b: &mut [R], n: usize) -> Result<(), CoreError> {
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == R::zero() {
            return Err(CoreError::SingularSystem);
        }
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == R::zero() {
                continue;
            }
            a[r * n + col] = R::zero();
            for c in col + 1..n {
                a[r * n + c] = a[r * n + c] - f * a[col * n + c];
            }
            b[r] = b[r] - f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in col + 1..n {
            acc = acc - a[col * n + c] * b[c];
        }
        b[col] = acc / a[col * n + col];
    }
    Ok(())
}

/// Start-distribution-weighted expected discounted return.
pub fn discounted_return<R: Real>(mdp: &FiniteMdpT<R>, pi: &PolicyT<R>) -> Result<R, CoreError> {
    let v = value_function(mdp, pi)?;
    Ok(expected_start_value(mdp, &v))
}

/// Discounted return under an arbitrary kernel with the MDP's rewards.
pub fn discounted_return_with_kernel<R: Real>(
    mdp: &FiniteMdpT<R>,
    kernel: &KernelT<R>,
    pi: &PolicyT<R>,
) -> Result<R, CoreError> {
    let v = value_function_with_kernel(mdp, kernel, pi)?;
    Ok(expected_start_value(mdp, &v))
}

pub fn expected_start_value<R: Real>(mdp: &FiniteMdpT<R>, values: &[R]) -> R {
    mdp.start
        .iter()
        .zip(values)
        .fold(R::zero(), |acc, (&p, &v)| acc + p * v)
}

/// Exact Lipschitz constant of a state function: max over pairs of
/// `|V(s) - V(s')| / d(s, s')`, zero for constant functions.
pub fn lipschitz_constant<R: Real>(values: &[R], space: &MetricSpaceT<R>) -> R {
    let n = space.len();
    assert_eq!(values.len(), n, "value vector length vs space");
    let mut best = R::zero();
    for i in 0..n {
        for j in i + 1..n {
            let ratio = (values[i] - values[j]).abs() / space.dist(i, j);
            if ratio > best {
                best = ratio;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelT;
    use rand::Rng;

    fn single_state_mdp(reward: f64, gamma: f64) -> FiniteMdpT<f64> {
        let space = MetricSpaceT::discrete(1).unwrap();
        let kernel = KernelT::new(1, 1, vec![1.0]).unwrap();
        FiniteMdpT::new(space, 1, kernel, vec![reward], gamma, vec![1.0]).unwrap()
    }

    pub(crate) fn random_mdp(
        rng: &mut impl Rng,
        n_states: usize,
        n_actions: usize,
        gamma: f64,
    ) -> FiniteMdpT<f64> {
        let coords: Vec<f64> = (0..n_states)
            .map(|i| i as f64 + rng.gen::<f64>() * 0.5)
            .collect();
        let space = MetricSpaceT::line(&coords).unwrap();
        let mut probs = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            let mut row: Vec<f64> = (0..n_states).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let sum: f64 = row.iter().sum();
            for p in &mut row {
                *p /= sum;
            }
            let s: f64 = row.iter().sum();
            row[n_states - 1] += 1.0 - s;
            probs.extend(row);
        }
        let kernel = KernelT::new(n_states, n_actions, probs).unwrap();
        let reward: Vec<f64> = (0..n_states * n_actions).map(|_| rng.gen::<f64>()).collect();
        let mut start: Vec<f64> = (0..n_states).map(|_| rng.gen::<f64>() + 0.1).collect();
        let sum: f64 = start.iter().sum();
        for p in &mut start {
            *p /= sum;
        }
        let s: f64 = start.iter().sum();
        start[n_states - 1] += 1.0 - s;
        FiniteMdpT::new(space, n_actions, kernel, reward, gamma, start).unwrap()
    }

    fn value_iteration_oracle(mdp: &FiniteMdpT<f64>, pi: &PolicyT<f64>, tol: f64) -> Vec<f64> {
        let n = mdp.n_states();
        let mut v = vec![0.0; n];
        loop {
            let mut next = vec![0.0; n];
            for s in 0..n {
                for a in 0..mdp.n_actions {
                    let w = pi.prob(s, a);
                    if w == 0.0 {
                        continue;
                    }
                    let mut q = mdp.reward_at(s, a);
                    for (s2, &p) in mdp.kernel.row(s, a).iter().enumerate() {
                        q += mdp.gamma * p * v[s2];
                    }
                    next[s] += w * q;
                }
            }
            let delta = next
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            v = next;
            if delta < tol {
                return v;
            }
        }
    }

    fn bellman_residual(mdp: &FiniteMdpT<f64>, pi: &PolicyT<f64>, v: &[f64]) -> f64 {
        let n = mdp.n_states();
        let mut worst = 0.0f64;
        for s in 0..n {
            let mut rhs = 0.0;
            for a in 0..mdp.n_actions {
                let w = pi.prob(s, a);
                if w == 0.0 {
                    continue;
                }
                let mut q = mdp.reward_at(s, a);
                for (s2, &p) in mdp.kernel.row(s, a).iter().enumerate() {
                    q += mdp.gamma * p * v[s2];
                }
                rhs += w * q;
            }
            worst = worst.max((v[s] - rhs).abs());
        }
        worst
    }

    #[test]
    fn geometric_series_value() {
        let mdp = single_state_mdp(1.0, 0.9);
        let pi = PolicyT::deterministic(1, 1, &[0]);
        let v = value_function(&mdp, &pi).unwrap();
        assert!((v[0] - 10.0).abs() < 1e-10);
    }

    #[test]
    fn zero_reward_zero_value() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut mdp = random_mdp(&mut rng, 5, 2, 0.95);
        mdp.reward.iter_mut().for_each(|r| *r = 0.0);
        let pi = PolicyT::uniform(5, 2);
        let v = value_function(&mdp, &pi).unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn matches_value_iteration_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mdp = random_mdp(&mut rng, 5, 2, 0.9);
        let pi = PolicyT::new(
            5,
            2,
            (0..5).flat_map(|_| [0.3, 0.7]).collect(),
        )
        .unwrap();
        let exact = value_function(&mdp, &pi).unwrap();
        let oracle = value_iteration_oracle(&mdp, &pi, 1e-12);
        for (a, b) in exact.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn bellman_residual_small_on_random_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.gen_range(2..8);
            let na = rng.gen_range(1..4);
            let mdp = random_mdp(&mut rng, n, na, 0.95);
            let pi = PolicyT::uniform(n, na);
            let v = value_function(&mdp, &pi).unwrap();
            assert!(bellman_residual(&mdp, &pi, &v) < 1e-10);
        }
    }

    #[test]
    fn point_mass_start_returns_v0() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut mdp = random_mdp(&mut rng, 4, 2, 0.9);
        mdp.start = vec![1.0, 0.0, 0.0, 0.0];
        let pi = PolicyT::uniform(4, 2);
        let v = value_function(&mdp, &pi).unwrap();
        let eta = discounted_return(&mdp, &pi).unwrap();
        assert!((eta - v[0]).abs() < 1e-12);
    }

    #[test]
    fn return_linear_in_start_distribution() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let mdp = random_mdp(&mut rng, 4, 2, 0.9);
        let pi = PolicyT::uniform(4, 2);
        let mut m1 = mdp.clone();
        m1.start = vec![1.0, 0.0, 0.0, 0.0];
        let mut m2 = mdp.clone();
        m2.start = vec![0.0, 0.0, 0.5, 0.5];
        let lambda = 0.3;
        let mut mix = mdp.clone();
        mix.start = (0..4)
            .map(|i| lambda * m1.start[i] + (1.0 - lambda) * m2.start[i])
            .collect();
        let e1 = discounted_return(&m1, &pi).unwrap();
        let e2 = discounted_return(&m2, &pi).unwrap();
        let em = discounted_return(&mix, &pi).unwrap();
        assert!((em - (lambda * e1 + (1.0 - lambda) * e2)).abs() < 1e-10);
    }

    #[test]
    fn chain_mdp_matches_monte_carlo() {
        // 4-state chain, deterministic-ish dynamics, uniform policy.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mdp = random_mdp(&mut rng, 4, 2, 0.9);
        let pi = PolicyT::uniform(4, 2);
        let exact = discounted_return(&mdp, &pi).unwrap();

        let n_roll = 200_000usize;
        let horizon = 200; // gamma^200 ~ 7e-10
        let mut sum = 0.0f64;
        let mut sumsq = 0.0f64;
        for _ in 0..n_roll {
            let mut s = sample_idx(&mut rng, &mdp.start);
            let mut ret = 0.0;
            let mut disc = 1.0;
            for _ in 0..horizon {
                let a = if rng.gen::<f64>() < 0.5 { 0 } else { 1 };
                ret += disc * mdp.reward_at(s, a);
                disc *= mdp.gamma;
                s = sample_idx(&mut rng, mdp.kernel.row(s, a));
            }
            sum += ret;
            sumsq += ret * ret;
        }
        let mean = sum / n_roll as f64;
        let var = (sumsq / n_roll as f64 - mean * mean).max(0.0);
        let se = (var / n_roll as f64).sqrt();
        assert!(
            (mean - exact).abs() < 3.0 * se + 1e-6,
            "MC {mean} vs exact {exact} (se {se})"
        );
    }

    fn sample_idx(rng: &mut impl Rng, p: &[f64]) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                return i;
            }
        }
        p.len() - 1
    }

    #[test]
    fn lipschitz_trivial_cases() {
        let space = MetricSpaceT::line(&[0.0, 2.0]).unwrap();
        assert_eq!(lipschitz_constant(&[5.0, 5.0], &space), 0.0);
        assert!((lipschitz_constant(&[0.0f64, 6.0], &space) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_matches_pair_scan_and_is_tight() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let n = rng.gen_range(2..10);
            let coords: Vec<f64> = (0..n).map(|i| i as f64 + rng.gen::<f64>()).collect();
            let space = MetricSpaceT::line(&coords).unwrap();
            let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 10.0).collect();
            let l = lipschitz_constant(&v, &space);
            let mut brute = 0.0f64;
            let mut tight = false;
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let r = (v[i] - v[j]).abs() / space.dist(i, j);
                    brute = brute.max(r);
                }
            }
            assert!((l - brute).abs() < 1e-12);
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    assert!(l * space.dist(i, j) + 1e-9 >= (v[i] - v[j]).abs());
                    if ((v[i] - v[j]).abs() - l * space.dist(i, j)).abs() < 1e-9 {
                        tight = true;
                    }
                }
            }
            assert!(tight, "bound must be attained on some pair");
        }
    }

    #[test]
    fn monotone_in_reward() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        for _ in 0..10 {
            let mdp = random_mdp(&mut rng, 5, 2, 0.9);
            let pi = PolicyT::uniform(5, 2);
            let v = value_function(&mdp, &pi).unwrap();
            let mut bumped = mdp.clone();
            for r in &mut bumped.reward {
                *r += rng.gen::<f64>() * 0.5;
            }
            let v2 = value_function(&bumped, &pi).unwrap();
            for (a, b) in v2.iter().zip(&v) {
                assert!(a + 1e-12 >= *b);
            }
        }
    }

    #[test]
    fn enumeration_is_exhaustive_and_capped() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let mdp = random_mdp(&mut rng, 3, 2, 0.9);
        let class =
            enumerate_policy_class(&mdp, PolicyClassKind::AllDeterministic, 0, DEFAULT_ENUM_CAP)
                .unwrap();
        assert_eq!(class.len(), 8);
        let mut seen = std::collections::HashSet::new();
        for p in &class.members {
            let key: Vec<usize> = (0..3)
                .map(|s| (0..2).position(|a| p.prob(s, a) == 1.0).unwrap())
                .collect();
            assert!(seen.insert(key));
        }

        let big = random_mdp(&mut rng, 8, 3, 0.9);
        let err = enumerate_policy_class(&big, PolicyClassKind::AllDeterministic, 0, 4096);
        match err {
            Err(CoreError::EnumerationCapExceeded { required, cap }) => {
                assert_eq!(required, 6561);
                assert_eq!(cap, 4096);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn sampled_class_reproducible() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        let mdp = random_mdp(&mut rng, 4, 3, 0.9);
        let kind = PolicyClassKind::SampledStochastic { count: 16 };
        let c1 = enumerate_policy_class(&mdp, kind, 99, DEFAULT_ENUM_CAP).unwrap();
        let c2 = enumerate_policy_class(&mdp, kind, 99, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(c1.members, c2.members);
    }
}
