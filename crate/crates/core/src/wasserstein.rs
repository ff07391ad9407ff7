//! Exact 1-Wasserstein distances on finite metric spaces.
//!
//! The transport problem is solved as a min-cost flow on the bipartite
//! supply/demand graph with successive shortest paths and node potentials,
//! which yields the exact optimum plus an optimal Kantorovich potential for
//! the dual form.

use crate::error::CoreError;
use crate::mdp::MetricSpaceT;
use crate::scalar::Real;

/// Exact optimal-transport cost between `p` and `q` under the space metric.
pub fn wasserstein1<R: Real>(
    p: &[R],
    q: &[R],
    space: &MetricSpaceT<R>,
) -> Result<R, CoreError> {
    solve(p, q, space).map(|s| s.cost)
}

/// Transport cost together with an optimal Kantorovich potential `phi`:
/// `phi` is 1-Lipschitz w.r.t. the metric and `sum phi * (p - q)` equals the cost.
pub fn wasserstein1_with_dual<R: Real>(
    p: &[R],
    q: &[R],
    space: &MetricSpaceT<R>,
) -> Result<(R, Vec<R>), CoreError> {
    let sol = solve(p, q, space)?;
    Ok((sol.cost, sol.potential))
}

struct Solution<R> {
    cost: R,
    potential: Vec<R>,
}

fn check_input<R: Real>(name: &str, p: &[R], n: usize) -> Result<(), CoreError> {
    if p.len() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "{name} has {} entries, space has {n}",
            p.len()
        )));
    }
    let mut sum = R::zero();
    for &x in p {
        if !x.is_finite() || x < -R::validation_tol() {
            return Err(CoreError::InvalidDistribution(format!(
                "{name} entry {x} is not a probability"
            )));
        }
        sum = sum + x;
    }
    if (sum - R::one()).abs() > R::c(1e-9) {
        return Err(CoreError::Infeasible(format!("{name} sums to {sum}")));
    }
    Ok(())
}

fn solve<R: Real>(p: &[R], q: &[R], space: &MetricSpaceT<R>) -> Result<Solution<R>, CoreError> {
    let n = space.len();
    check_input("p", p, n)?;
    check_input("q", q, n)?;

    let mass_tol = R::epsilon() * R::c(64.0);
    let inf = R::infinity();

    // Node layout: 0..n supply copies, n..2n demand copies.
    let m = 2 * n;
    let mut supply: Vec<R> = p.iter().map(|&x| x.max(R::zero())).collect();
    let mut demand: Vec<R> = q.iter().map(|&x| x.max(R::zero())).collect();
    let mut flow = vec![R::zero(); n * n]; // flow[i*n + j] on arc supply_i -> demand_j
    let mut pot = vec![R::zero(); m];
    let mut cost = R::zero();

    let mut dist = vec![R::zero(); m];
    let mut prev = vec![usize::MAX; m];
    let mut done = vec![false; m];

    let max_augment = 4 * n * n + 16;
    for _round in 0..max_augment {
        let remaining: R = supply.iter().copied().sum();
        if remaining <= mass_tol * R::c(n as f64) {
            break;
        }

        // Dijkstra on reduced costs from all supplies with remaining mass.
        for v in 0..m {
            dist[v] = inf;
            prev[v] = usize::MAX;
            done[v] = false;
        }
        for i in 0..n {
            if supply[i] > mass_tol {
                dist[i] = R::zero();
            }
        }
        loop {
            let mut u = usize::MAX;
            let mut best = inf;
            for v in 0..m {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < n {
                // supply -> each demand, forward arc
                for j in 0..n {
                    let w = n + j;
                    let rc = space.dist(u, j) + pot[u] - pot[w];
                    let nd = dist[u] + rc.max(R::zero());
                    if nd < dist[w] {
                        dist[w] = nd;
                        prev[w] = u;
                    }
                }
            } else {
                // demand -> supply, backward arcs carrying flow
                let j = u - n;
                for i in 0..n {
                    if flow[i * n + j] > mass_tol {
                        let rc = -space.dist(i, j) + pot[u] - pot[i];
                        let nd = dist[u] + rc.max(R::zero());
                        if nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = u;
                        }
                    }
                }
            }
        }

        // Closest demand with remaining mass.
        let mut target = usize::MAX;
        let mut best = inf;
        for j in 0..n {
            if demand[j] > mass_tol && dist[n + j] < best {
                best = dist[n + j];
                target = n + j;
            }
        }
        if target == usize::MAX {
            return Err(CoreError::Infeasible(
                "no augmenting path; unbalanced masses".into(),
            ));
        }

        // Walk the path back to its source, collecting the bottleneck.
        let mut path = Vec::new();
        let mut v = target;
        while prev[v] != usize::MAX {
            path.push((prev[v], v));
            v = prev[v];
        }
        let source = v;
        let mut push = supply[source].min(demand[target - n]);
        for &(a, b) in &path {
            if a >= n {
                // backward arc demand_a -> supply_b
                push = push.min(flow[b * n + (a - n)]);
            }
        }
        if push <= mass_tol {
            // Numerically exhausted; drop the residual crumbs.
            break;
        }
        for &(a, b) in &path {
            if a < n {
                flow[a * n + (b - n)] = flow[a * n + (b - n)] + push;
                cost = cost + push * space.dist(a, b - n);
            } else {
                flow[b * n + (a - n)] = flow[b * n + (a - n)] - push;
                cost = cost - push * space.dist(b, a - n);
            }
        }
        supply[source] = supply[source] - push;
        demand[target - n] = demand[target - n] - push;

        // Potential update keeps all residual reduced costs nonnegative.
        let d_target = dist[target];
        for v2 in 0..m {
            if dist[v2] < inf {
                pot[v2] = pot[v2] + dist[v2].min(d_target);
            }
        }
    }

    // Supplies that carry no flow (zero or numerically exhausted mass) are
    // unreachable through residual arcs, so their potentials can be stale and
    // break dual feasibility on flowless arcs. Raising them to the feasibility
    // boundary costs at most the leftover mass times the diameter.
    for i in 0..n {
        let mut lo = pot[i];
        for j in 0..n {
            let bound = pot[n + j] - space.dist(i, j);
            if bound > lo {
                lo = bound;
            }
        }
        pot[i] = lo;
    }

    // Dual extraction: u_i = -pot[i] is feasible with v_j = pot[n+j];
    // c-transform v'(y) = min_x (d(x,y) - u(x)), then phi = -v' is an optimal
    // 1-Lipschitz Kantorovich potential.
    let mut phi = vec![R::zero(); n];
    for y in 0..n {
        let mut vy = inf;
        for x in 0..n {
            let cand = space.dist(x, y) + pot[x];
            if cand < vy {
                vy = cand;
            }
        }
        phi[y] = -vy;
    }

    Ok(Solution {
        cost: cost.max(R::zero()),
        potential: phi,
    })
}
