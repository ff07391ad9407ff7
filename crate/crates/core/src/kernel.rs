//! Transition kernels on the real state space: liftings, mixtures, kernel
//! distances, and the distance-to-convex-hull solver.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::mdp::MetricSpaceT;
use crate::scalar::Real;
use crate::wasserstein::{wasserstein1, wasserstein1_with_dual};

/// Transition kernel `T(s'|s,a)` over a finite state/action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelT<R> {
    n_states: usize,
    n_actions: usize,
    /// Row-major by `(s, a)`, each row a distribution over next states.
    probs: Vec<R>,
}

impl<R: Real> KernelT<R> {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<R>) -> Result<Self, CoreError> {
        if probs.len() != n_states * n_actions * n_states {
            return Err(CoreError::ShapeMismatch(format!(
                "kernel storage {} != {}",
                probs.len(),
                n_states * n_actions * n_states
            )));
        }
        let k = Self {
            n_states,
            n_actions,
            probs,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.row(s, a);
                let mut sum = R::zero();
                for &p in row {
                    if !p.is_finite() || p < R::zero() {
                        return Err(CoreError::InvalidDistribution(format!(
                            "kernel row ({s},{a}) entry {p}"
                        )));
                    }
                    sum = sum + p;
                }
                if (sum - R::one()).abs() > R::validation_tol() {
                    return Err(CoreError::InvalidDistribution(format!(
                        "kernel row ({s},{a}) sums to {sum}"
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[R] {
        let i = (s * self.n_actions + a) * self.n_states;
        &self.probs[i..i + self.n_states]
    }

    pub fn identity(n_states: usize, n_actions: usize) -> Self {
        let mut probs = vec![R::zero(); n_states * n_actions * n_states];
        for s in 0..n_states {
            for a in 0..n_actions {
                probs[(s * n_actions + a) * n_states + s] = R::one();
            }
        }
        Self {
            n_states,
            n_actions,
            probs,
        }
    }
}

/// Projection/section pair tying a simulator state space to the real one.
///
/// `projection[s0]` maps real state `s0` onto a simulator state; `section[si]`
/// embeds simulator state `si` back, with `projection[section[si]] == si`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateLifting {
    projection: Vec<usize>,
    section: Vec<usize>,
}

impl StateLifting {
    pub fn new(projection: Vec<usize>, section: Vec<usize>) -> Result<Self, CoreError> {
        let n_sim = section.len();
        if projection.is_empty() || n_sim == 0 {
            return Err(CoreError::SectionViolation("empty mapping".into()));
        }
        for (s0, &si) in projection.iter().enumerate() {
            if si >= n_sim {
                return Err(CoreError::SectionViolation(format!(
                    "projection[{s0}] = {si} out of range"
                )));
            }
        }
        for (si, &s0) in section.iter().enumerate() {
            if s0 >= projection.len() {
                return Err(CoreError::SectionViolation(format!(
                    "section[{si}] = {s0} out of range"
                )));
            }
            if projection[s0] != si {
                return Err(CoreError::SectionViolation(format!(
                    "f(g({si})) = {} != {si}",
                    projection[s0]
                )));
            }
        }
        Ok(Self {
            projection,
            section,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            projection: (0..n).collect(),
            section: (0..n).collect(),
        }
    }

    pub fn n_real(&self) -> usize {
        self.projection.len()
    }

    pub fn n_sim(&self) -> usize {
        self.section.len()
    }

    pub fn project(&self, s0: usize) -> usize {
        self.projection[s0]
    }

    pub fn embed(&self, si: usize) -> usize {
        self.section[si]
    }
}

/// A simulator kernel pulled back to the real state space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiftedKernelT<R> {
    pub sim_kernel: KernelT<R>,
    pub lifting: StateLifting,
    pub lifted: KernelT<R>,
}

/// Pushforward of the simulator kernel through the section: row `(s, a)` of the
/// lifted kernel places `T_i(si'|f(s), a)` on the representative `g(si')`.
pub fn lift_kernel<R: Real>(
    sim_kernel: &KernelT<R>,
    lifting: &StateLifting,
    n_real: usize,
) -> Result<LiftedKernelT<R>, CoreError> {
    if lifting.n_real() != n_real {
        return Err(CoreError::ShapeMismatch(format!(
            "lifting covers {} real states, expected {n_real}",
            lifting.n_real()
        )));
    }
    if sim_kernel.n_states() != lifting.n_sim() {
        return Err(CoreError::ShapeMismatch(format!(
            "sim kernel has {} states, lifting has {}",
            sim_kernel.n_states(),
            lifting.n_sim()
        )));
    }
    let n_a = sim_kernel.n_actions();
    let mut probs = vec![R::zero(); n_real * n_a * n_real];
    for s0 in 0..n_real {
        let si = lifting.project(s0);
        for a in 0..n_a {
            let row = sim_kernel.row(si, a);
            let out = &mut probs[(s0 * n_a + a) * n_real..(s0 * n_a + a + 1) * n_real];
            for (si2, &p) in row.iter().enumerate() {
                out[lifting.embed(si2)] = out[lifting.embed(si2)] + p;
            }
        }
    }
    Ok(LiftedKernelT {
        sim_kernel: sim_kernel.clone(),
        lifting: lifting.clone(),
        lifted: KernelT::new(n_real, n_a, probs)?,
    })
}

/// Worst-case per-(state, action) 1-Wasserstein distance between two kernels,
/// with the lexicographically smallest maximizing pair as witness.
pub fn kernel_distance<R: Real>(
    a: &KernelT<R>,
    b: &KernelT<R>,
    space: &MetricSpaceT<R>,
) -> Result<(R, (usize, usize)), CoreError> {
    if a.n_states() != b.n_states() || a.n_actions() != b.n_actions() {
        return Err(CoreError::ShapeMismatch("kernel shapes differ".into()));
    }
    if a.n_states() != space.len() {
        return Err(CoreError::ShapeMismatch("kernel vs metric space".into()));
    }
    let mut best = R::neg_infinity();
    let mut witness = (0, 0);
    for s in 0..a.n_states() {
        for act in 0..a.n_actions() {
            let w = wasserstein1(a.row(s, act), b.row(s, act), space)?;
            if w > best {
                best = w;
                witness = (s, act);
            }
        }
    }
    Ok((best.max(R::zero()), witness))
}

/// Convex mixture of lifted kernels.
#[derive(Debug, Clone)]
pub struct MixtureKernelT<R> {
    pub components: Vec<LiftedKernelT<R>>,
    pub weights: Vec<R>,
    pub mixed: KernelT<R>,
}

pub fn check_simplex<R: Real>(weights: &[R]) -> Result<(), CoreError> {
    if weights.is_empty() {
        return Err(CoreError::SimplexViolation("empty weight vector".into()));
    }
    let mut sum = R::zero();
    for &w in weights {
        if !w.is_finite() || w < -R::validation_tol() {
            return Err(CoreError::SimplexViolation(format!("weight {w}")));
        }
        sum = sum + w;
    }
    if (sum - R::one()).abs() > R::c(1e-12).max(R::validation_tol()) {
        return Err(CoreError::SimplexViolation(format!("weights sum to {sum}")));
    }
    Ok(())
}

/// Row-wise convex combination of the components' lifted kernels.
pub fn mix_kernels<R: Real>(
    components: &[LiftedKernelT<R>],
    weights: &[R],
) -> Result<MixtureKernelT<R>, CoreError> {
    if components.is_empty() {
        return Err(CoreError::SimplexViolation("no components".into()));
    }
    if components.len() != weights.len() {
        return Err(CoreError::ShapeMismatch(
            "component/weight count mismatch".into(),
        ));
    }
    check_simplex(weights)?;
    let mixed = mix_raw(components, weights)?;
    Ok(MixtureKernelT {
        components: components.to_vec(),
        weights: weights.to_vec(),
        mixed,
    })
}

fn mix_raw<R: Real>(
    components: &[LiftedKernelT<R>],
    weights: &[R],
) -> Result<KernelT<R>, CoreError> {
    let n = components[0].lifted.n_states();
    let n_a = components[0].lifted.n_actions();
    for c in components {
        if c.lifted.n_states() != n || c.lifted.n_actions() != n_a {
            return Err(CoreError::ShapeMismatch("component shapes differ".into()));
        }
    }
    if components.len() == 1 {
        return Ok(components[0].lifted.clone());
    }
    let mut probs = vec![R::zero(); n * n_a * n];
    for (c, &w) in components.iter().zip(weights) {
        for s in 0..n {
            for a in 0..n_a {
                let row = c.lifted.row(s, a);
                let base = (s * n_a + a) * n;
                for (s2, &p) in row.iter().enumerate() {
                    probs[base + s2] = probs[base + s2] + w * p;
                }
            }
        }
    }
    // Repair accumulated float drift on each row before validation.
    for ra in 0..n * n_a {
        let row = &mut probs[ra * n..(ra + 1) * n];
        let sum: R = row.iter().copied().sum();
        let drift = R::one() - sum;
        if drift != R::zero() {
            let (j, _) = row
                .iter()
                .enumerate()
                .fold((0, R::neg_infinity()), |acc, (i, &p)| {
                    if p > acc.1 {
                        (i, p)
                    } else {
                        acc
                    }
                });
            row[j] = (row[j] + drift).max(R::zero());
        }
    }
    KernelT::new(n, n_a, probs)
}

/// Configuration of the hull-distance solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HullSolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Optional CSV trace sink (iteration, weights, objective).
    pub trace_path: Option<std::path::PathBuf>,
}

impl Default for HullSolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 4000,
            trace_path: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HullSolutionT<R> {
    pub eps_hull: R,
    pub weights: Vec<R>,
    /// Lexicographically smallest maximizing (state, action) at the solution.
    pub witness: (usize, usize),
    pub iterations: usize,
}

/// Objective of the hull problem: worst-row W1 distance from `t0` to the
/// mixture at `weights`.
pub fn hull_objective<R: Real>(
    t0: &KernelT<R>,
    components: &[LiftedKernelT<R>],
    weights: &[R],
    space: &MetricSpaceT<R>,
) -> Result<R, CoreError> {
    let mixed = mix_raw(components, weights)?;
    kernel_distance(t0, &mixed, space).map(|(d, _)| d)
}

/// Distance from the real kernel to the convex hull of the lifted kernels.
///
/// Projected subgradient descent on the simplex with adaptive Polyak target
/// levels; the solver starts from the best vertex and the uniform point, so the
/// result never exceeds `min_i Delta_i`.
pub fn hull_distance<R: Real>(
    t0: &KernelT<R>,
    components: &[LiftedKernelT<R>],
    space: &MetricSpaceT<R>,
    config: &HullSolverConfig,
) -> Result<HullSolutionT<R>, CoreError> {
    if components.is_empty() {
        return Err(CoreError::SimplexViolation("no components".into()));
    }
    let n_comp = components.len();
    let n = t0.n_states();
    let n_a = t0.n_actions();
    for c in components {
        if c.lifted.n_states() != n || c.lifted.n_actions() != n_a {
            return Err(CoreError::ShapeMismatch("component vs t0 shape".into()));
        }
    }

    let mut trace: Vec<(usize, Vec<R>, R)> = Vec::new();

    // Objective + one subgradient (via the optimal dual at the maximizing row).
    let eval = |w: &[R]| -> Result<(R, (usize, usize), Vec<R>), CoreError> {
        let mixed = mix_raw(components, w)?;
        let mut best = R::neg_infinity();
        let mut witness = (0, 0);
        let mut grad = vec![R::zero(); n_comp];
        for s in 0..n {
            for a in 0..n_a {
                let (val, phi) = wasserstein1_with_dual(t0.row(s, a), mixed.row(s, a), space)?;
                if val > best {
                    best = val;
                    witness = (s, a);
                    // d/dw_i of sum phi*(t0_row - mix_row) = -<phi, comp_i row>
                    for (i, c) in components.iter().enumerate() {
                        let row = c.lifted.row(s, a);
                        grad[i] = -phi
                            .iter()
                            .zip(row)
                            .fold(R::zero(), |acc, (&f, &p)| acc + f * p);
                    }
                }
            }
        }
        Ok((best.max(R::zero()), witness, grad))
    };

    // Seed with every vertex plus the uniform mixture.
    let mut best_w = vec![R::zero(); n_comp];
    best_w[0] = R::one();
    let mut best_val = R::infinity();
    let mut best_witness = (0, 0);
    for i in 0..n_comp {
        let mut w = vec![R::zero(); n_comp];
        w[i] = R::one();
        let (v, wit, _) = eval(&w)?;
        if v < best_val {
            best_val = v;
            best_w = w;
            best_witness = wit;
        }
    }
    {
        let w = vec![R::one() / R::c(n_comp as f64); n_comp];
        let (v, wit, _) = eval(&w)?;
        if v < best_val {
            best_val = v;
            best_w = w;
            best_witness = wit;
        }
    }

    let tol = R::c(config.tolerance);
    let mut iterations = 0;
    if n_comp > 1 && best_val > tol {
        let mut w = best_w.clone();
        // Adaptive Polyak: assume target level below best; halve the gap when
        // the level proves unreachable.
        let mut delta = (best_val * R::c(0.5)).max(tol);
        let mut since_improve = 0usize;
        for it in 0..config.max_iterations {
            iterations = it + 1;
            let (val, wit, grad) = eval(&w)?;
            trace.push((it, w.clone(), val));
            if val < best_val - tol * R::c(0.01) {
                best_val = val;
                best_w = w.clone();
                best_witness = wit;
                since_improve = 0;
            } else {
                since_improve += 1;
                if since_improve > 60 {
                    delta = delta * R::c(0.5);
                    since_improve = 0;
                    if delta < tol * R::c(0.5) {
                        break;
                    }
                }
            }
            if best_val <= tol {
                break;
            }
            let gnorm2 = grad.iter().fold(R::zero(), |acc, &g| acc + g * g);
            if gnorm2 <= R::epsilon() {
                break;
            }
            let target = (best_val - delta).max(R::zero());
            let step = (val - target).max(tol * R::c(0.1)) / gnorm2;
            for i in 0..n_comp {
                w[i] = w[i] - step * grad[i];
            }
            project_simplex(&mut w);
        }
    }

    if let Some(path) = &config.trace_path {
        let mut out = String::from("iteration,objective,weights\n");
        for (it, w, v) in &trace {
            let ws: Vec<String> = w.iter().map(|x| format!("{x}")).collect();
            out.push_str(&format!("{it},{v},\"{}\"\n", ws.join(";")));
        }
        std::fs::write(path, out)?;
    }

    if best_val > tol && iterations >= config.max_iterations && config.max_iterations > 0 {
        // Budget ran out before convergence was certain; report best-so-far.
        return Err(CoreError::BudgetExhausted {
            iterations,
            best: best_val.to_f64().unwrap_or(f64::NAN),
        });
    }

    Ok(HullSolutionT {
        eps_hull: best_val,
        weights: best_w,
        witness: best_witness,
        iterations,
    })
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex<R: Real>(w: &mut [R]) {
    let n = w.len();
    let mut sorted: Vec<R> = w.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = R::zero();
    let mut theta = R::zero();
    let mut k = 0;
    for (i, &u) in sorted.iter().enumerate() {
        acc = acc + u;
        let t = (acc - R::one()) / R::c((i + 1) as f64);
        if u - t > R::zero() {
            theta = t;
            k = i + 1;
        }
    }
    let _ = k;
    let mut sum = R::zero();
    for x in w.iter_mut() {
        *x = (*x - theta).max(R::zero());
        sum = sum + *x;
    }
    if sum > R::zero() {
        for x in w.iter_mut() {
            *x = *x / sum;
        }
    } else {
        let u = R::one() / R::c(n as f64);
        for x in w.iter_mut() {
            *x = u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_kernel(rng: &mut impl Rng, n: usize, n_a: usize) -> KernelT<f64> {
        let mut probs = Vec::with_capacity(n * n_a * n);
        for _ in 0..n * n_a {
            let mut row: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let sum: f64 = row.iter().sum();
            for p in &mut row {
                *p /= sum;
            }
            let s: f64 = row.iter().sum();
            row[n - 1] += 1.0 - s;
            probs.extend(row);
        }
        KernelT::new(n, n_a, probs).unwrap()
    }

    fn line_space(n: usize) -> MetricSpaceT<f64> {
        MetricSpaceT::line(&(0..n).map(|i| i as f64).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_lifting_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = random_kernel(&mut rng, 4, 2);
        let lifted = lift_kernel(&k, &StateLifting::identity(4), 4).unwrap();
        assert_eq!(lifted.lifted, k);
    }

    #[test]
    fn coarsening_mass_lands_on_representatives() {
        // 4 real states coarsened to 2 sim states; representatives 0 and 2.
        let lifting = StateLifting::new(vec![0, 0, 1, 1], vec![0, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sim = random_kernel(&mut rng, 2, 2);
        let lifted = lift_kernel(&sim, &lifting, 4).unwrap();
        for s in 0..4 {
            for a in 0..2 {
                let row = lifted.lifted.row(s, a);
                assert!(row[1].abs() < 1e-15 && row[3].abs() < 1e-15);
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lifting_matches_pushforward_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n_real = rng.gen_range(2..8);
            let n_sim = rng.gen_range(1..=n_real);
            // Random surjective projection with a consistent section.
            let mut projection: Vec<usize> =
                (0..n_real).map(|_| rng.gen_range(0..n_sim)).collect();
            for si in 0..n_sim {
                projection[si] = si; // guarantee surjectivity
            }
            let mut section = vec![usize::MAX; n_sim];
            for (s0, &si) in projection.iter().enumerate() {
                if section[si] == usize::MAX {
                    section[si] = s0;
                }
            }
            let lifting = StateLifting::new(projection.clone(), section.clone()).unwrap();
            let sim = random_kernel(&mut rng, n_sim, 2);
            let lifted = lift_kernel(&sim, &lifting, n_real).unwrap();
            for s0 in 0..n_real {
                for a in 0..2 {
                    // Direct summation of the pushforward.
                    let mut expect = vec![0.0; n_real];
                    for (si2, &p) in sim.row(projection[s0], a).iter().enumerate() {
                        expect[section[si2]] += p;
                    }
                    for (x, y) in lifted.lifted.row(s0, a).iter().zip(&expect) {
                        assert!((x - y).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn bad_section_rejected() {
        // section[1] = 2 but projection[2] = 0 != 1.
        assert!(matches!(
            StateLifting::new(vec![0, 1, 0], vec![0, 2]),
            Err(CoreError::SectionViolation(_))
        ));
    }

    #[test]
    fn kernel_distance_trivial_and_brute() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let space = line_space(4);
        let a = random_kernel(&mut rng, 4, 2);
        let (d, _) = kernel_distance(&a, &a, &space).unwrap();
        assert!(d.abs() < 1e-12);

        // Single differing row with point masses at distance 3.
        let mut probs = vec![0.0; 4 * 2 * 4];
        for s in 0..4 {
            for act in 0..2 {
                probs[(s * 2 + act) * 4 + s] = 1.0;
            }
        }
        let b1 = KernelT::new(4, 2, probs.clone()).unwrap();
        probs[(1 * 2 + 1) * 4 + 1] = 0.0;
        probs[(1 * 2 + 1) * 4 + 3] = 1.0;
        let b2 = KernelT::new(4, 2, probs).unwrap();
        let (d2, wit) = kernel_distance(&b1, &b2, &space).unwrap();
        assert!((d2 - 2.0).abs() < 1e-12, "{d2}"); // mass moved 1 -> 3, distance 2
        assert_eq!(wit, (1, 1));

        // Random pair matches a brute-force scan.
        let x = random_kernel(&mut rng, 4, 2);
        let y = random_kernel(&mut rng, 4, 2);
        let (d3, _) = kernel_distance(&x, &y, &space).unwrap();
        let mut brute = 0.0f64;
        for s in 0..4 {
            for act in 0..2 {
                brute = brute.max(wasserstein1(x.row(s, act), y.row(s, act), &space).unwrap());
            }
        }
        assert!((d3 - brute).abs() < 1e-12);
    }

    #[test]
    fn mixture_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = random_kernel(&mut rng, 3, 2);
        let c = lift_kernel(&k, &StateLifting::identity(3), 3).unwrap();
        let single = mix_kernels(&[c.clone()], &[1.0]).unwrap();
        assert_eq!(single.mixed, c.lifted);

        let k2 = random_kernel(&mut rng, 3, 2);
        let c2 = lift_kernel(&k2, &StateLifting::identity(3), 3).unwrap();
        let half = mix_kernels(&[c.clone(), c2.clone()], &[0.5, 0.5]).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                for s2 in 0..3 {
                    let expect = 0.5 * (c.lifted.row(s, a)[s2] + c2.lifted.row(s, a)[s2]);
                    assert!((half.mixed.row(s, a)[s2] - expect).abs() < 1e-12);
                }
            }
        }

        assert!(matches!(
            mix_kernels(&[c, c2], &[0.7, 0.7]),
            Err(CoreError::SimplexViolation(_))
        ));
    }

    #[test]
    fn mixture_w1_convexity_per_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let space = line_space(4);
        let t0 = random_kernel(&mut rng, 4, 2);
        let comps: Vec<_> = (0..3)
            .map(|_| {
                lift_kernel(
                    &random_kernel(&mut rng, 4, 2),
                    &StateLifting::identity(4),
                    4,
                )
                .unwrap()
            })
            .collect();
        let w = [0.2, 0.5, 0.3];
        let mix = mix_kernels(&comps, &w).unwrap();
        for s in 0..4 {
            for a in 0..2 {
                let lhs = wasserstein1(t0.row(s, a), mix.mixed.row(s, a), &space).unwrap();
                let rhs: f64 = comps
                    .iter()
                    .zip(&w)
                    .map(|(c, &wi)| {
                        wi * wasserstein1(t0.row(s, a), c.lifted.row(s, a), &space).unwrap()
                    })
                    .sum();
                assert!(lhs <= rhs + 1e-9);
            }
        }
    }

    #[test]
    fn hull_objective_is_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let space = line_space(4);
        let t0 = random_kernel(&mut rng, 4, 2);
        let comps: Vec<_> = (0..3)
            .map(|_| {
                lift_kernel(
                    &random_kernel(&mut rng, 4, 2),
                    &StateLifting::identity(4),
                    4,
                )
                .unwrap()
            })
            .collect();
        for _ in 0..20 {
            let mut w1: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            let mut w2: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            project_simplex(&mut w1);
            project_simplex(&mut w2);
            let lam: f64 = rng.gen();
            let wm: Vec<f64> = (0..3).map(|i| lam * w1[i] + (1.0 - lam) * w2[i]).collect();
            let j1 = hull_objective(&t0, &comps, &w1, &space).unwrap();
            let j2 = hull_objective(&t0, &comps, &w2, &space).unwrap();
            let jm = hull_objective(&t0, &comps, &wm, &space).unwrap();
            assert!(jm <= lam * j1 + (1.0 - lam) * j2 + 1e-9);
        }
    }

    #[test]
    fn hull_distance_component_equals_t0() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let space = line_space(4);
        let t0 = random_kernel(&mut rng, 4, 2);
        let comps = vec![
            lift_kernel(&t0, &StateLifting::identity(4), 4).unwrap(),
            lift_kernel(
                &random_kernel(&mut rng, 4, 2),
                &StateLifting::identity(4),
                4,
            )
            .unwrap(),
        ];
        let sol = hull_distance(&t0, &comps, &space, &HullSolverConfig::default()).unwrap();
        assert!(sol.eps_hull < 1e-9, "{}", sol.eps_hull);
        assert!((sol.weights[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hull_distance_constructed_interior_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let space = line_space(4);
        let c1 = lift_kernel(
            &random_kernel(&mut rng, 4, 2),
            &StateLifting::identity(4),
            4,
        )
        .unwrap();
        let c2 = lift_kernel(
            &random_kernel(&mut rng, 4, 2),
            &StateLifting::identity(4),
            4,
        )
        .unwrap();
        let t0 = mix_kernels(&[c1.clone(), c2.clone()], &[0.5, 0.5])
            .unwrap()
            .mixed;
        let cfg = HullSolverConfig::default();
        let sol = hull_distance(&t0, &[c1, c2], &space, &cfg).unwrap();
        assert!(sol.eps_hull <= cfg.tolerance, "{}", sol.eps_hull);
    }

    #[test]
    fn hull_distance_matches_grid_oracle_n2() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let space = line_space(4);
        for _ in 0..5 {
            let t0 = random_kernel(&mut rng, 4, 2);
            let comps: Vec<_> = (0..2)
                .map(|_| {
                    lift_kernel(
                        &random_kernel(&mut rng, 4, 2),
                        &StateLifting::identity(4),
                        4,
                    )
                    .unwrap()
                })
                .collect();
            let sol = hull_distance(&t0, &comps, &space, &HullSolverConfig::default()).unwrap();
            let mut grid_best = f64::INFINITY;
            for k in 0..=1000 {
                let w0 = k as f64 / 1000.0;
                let j = hull_objective(&t0, &comps, &[w0, 1.0 - w0], &space).unwrap();
                grid_best = grid_best.min(j);
            }
            // Within grid resolution of the dense scan.
            assert!(
                sol.eps_hull <= grid_best + 2e-3,
                "solver {} vs grid {grid_best}",
                sol.eps_hull
            );
            // Never worse than the best vertex.
            for i in 0..2 {
                let mut w = vec![0.0; 2];
                w[i] = 1.0;
                let vertex = hull_objective(&t0, &comps, &w, &space).unwrap();
                assert!(sol.eps_hull <= vertex + 1e-9);
            }
        }
    }
}
