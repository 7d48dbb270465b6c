//! Closed asymmetric TSP tours anchored at node 0.
//!
//! `solve_exact` is Held–Karp dynamic programming; `solve_heuristic` is
//! nearest-neighbour construction, simulated annealing, then first-improvement
//! 2-opt and or-opt.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest instance (anchor included) accepted by [`solve_exact`].
pub const EXACT_MAX_NODES: usize = 13;

#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    cost: Vec<Vec<f64>>,
}

impl TspInstance {
    pub fn new(cost: Vec<Vec<f64>>) -> Result<Self> {
        let n = cost.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty TSP cost matrix".into()));
        }
        for (i, row) in cost.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput("TSP cost matrix is not square".into()));
            }
            for (j, &c) in row.iter().enumerate() {
                if !(c >= 0.0 && c.is_finite()) {
                    return Err(Error::InvalidInput(format!("bad TSP cost at ({i}, {j})")));
                }
                if i == j && c != 0.0 {
                    return Err(Error::InvalidInput("TSP diagonal must be zero".into()));
                }
            }
        }
        Ok(Self { cost })
    }

    pub fn len(&self) -> usize {
        self.cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost.is_empty()
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cost[i][j]
    }

    /// Cost of a closed tour given as `[0, .., 0]`.
    pub fn tour_cost(&self, tour: &[usize]) -> f64 {
        tour.windows(2).map(|w| self.cost[w[0]][w[1]]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    /// Starts and ends at the anchor.
    pub nodes: Vec<usize>,
    pub cost: f64,
    pub exact: bool,
}

pub fn solve_exact(inst: &TspInstance) -> Result<Tour> {
    let n = inst.len();
    if n > EXACT_MAX_NODES {
        return Err(Error::TspTooLarge {
            size: n,
            max: EXACT_MAX_NODES,
        });
    }
    if n == 1 {
        return Ok(Tour {
            nodes: vec![0, 0],
            cost: 0.0,
            exact: true,
        });
    }
    // best[mask][last]: cheapest path from the anchor through `mask` ending at
    // node last+1; mask bit k stands for node k+1
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut best = vec![f64::INFINITY; (1 << m) * m];
    let mut parent = vec![usize::MAX; (1 << m) * m];
    for k in 0..m {
        best[(1 << k) * m + k] = inst.cost(0, k + 1);
    }
    for mask in 1..=full {
        for last in 0..m {
            if mask & (1 << last) == 0 {
                continue;
            }
            let here = best[mask * m + last];
            if !here.is_finite() {
                continue;
            }
            for next in 0..m {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let nm = mask | (1 << next);
                let cand = here + inst.cost(last + 1, next + 1);
                if cand < best[nm * m + next] {
                    best[nm * m + next] = cand;
                    parent[nm * m + next] = last;
                }
            }
        }
    }
    let mut cost = f64::INFINITY;
    let mut last = 0;
    for k in 0..m {
        let c = best[full * m + k] + inst.cost(k + 1, 0);
        if c < cost {
            cost = c;
            last = k;
        }
    }
    let mut nodes = vec![0];
    let mut mask = full;
    let mut cur = last;
    loop {
        nodes.push(cur + 1);
        let p = parent[mask * m + cur];
        mask &= !(1 << cur);
        if p == usize::MAX {
            break;
        }
        cur = p;
    }
    nodes.push(0);
    nodes[1..=m].reverse();
    Ok(Tour {
        nodes,
        cost,
        exact: true,
    })
}

/// Annealing and local-search budget for [`solve_heuristic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicBudget {
    /// Candidate moves tried at each temperature.
    pub moves_per_temperature: usize,
    /// Cooling factor applied after each temperature step.
    pub cooling: f64,
    /// Annealing stops once the temperature drops below this fraction of the start.
    pub final_fraction: f64,
}

impl Default for HeuristicBudget {
    fn default() -> Self {
        Self {
            moves_per_temperature: 50,
            cooling: 0.995,
            final_fraction: 1e-3,
        }
    }
}

pub fn solve_heuristic(inst: &TspInstance, seed: u64, budget: HeuristicBudget) -> Tour {
    let n = inst.len();
    if n <= 2 {
        let nodes: Vec<usize> = (0..n).chain(std::iter::once(0)).collect();
        let cost = inst.tour_cost(&nodes);
        return Tour {
            nodes,
            cost,
            exact: false,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // order excludes the anchor; the tour is 0 -> order -> 0
    let mut order = nearest_neighbor(inst);
    let mut cost = open_cost(inst, &order);
    let mut best = order.clone();
    let mut best_cost = cost;

    let arcs = (n * (n - 1)) as f64;
    let mean: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| inst.cost(i, j))
        .sum::<f64>()
        / arcs;
    let start_temp = mean.max(f64::MIN_POSITIVE);
    let mut temp = start_temp;
    let m = order.len();
    while temp >= budget.final_fraction * start_temp {
        for _ in 0..budget.moves_per_temperature {
            let mut cand = order.clone();
            if rng.gen_bool(0.5) {
                // segment reversal
                let i = rng.gen_range(0..m);
                let j = rng.gen_range(0..m);
                let (i, j) = (i.min(j), i.max(j));
                if i == j {
                    continue;
                }
                cand[i..=j].reverse();
            } else {
                // single-node relocation
                let i = rng.gen_range(0..m);
                let node = cand.remove(i);
                let j = rng.gen_range(0..m);
                cand.insert(j, node);
            }
            let c = open_cost(inst, &cand);
            let delta = c - cost;
            if delta <= 0.0 || rng.gen::<f64>() < (-delta / temp).exp() {
                order = cand;
                cost = c;
                if cost < best_cost {
                    best_cost = cost;
                    best = order.clone();
                }
            }
        }
        temp *= budget.cooling;
    }

    let mut order = best;
    local_search(inst, &mut order);
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(0);
    nodes.extend_from_slice(&order);
    nodes.push(0);
    let cost = inst.tour_cost(&nodes);
    Tour {
        nodes,
        cost,
        exact: false,
    }
}

fn open_cost(inst: &TspInstance, order: &[usize]) -> f64 {
    let mut c = inst.cost(0, order[0]);
    for w in order.windows(2) {
        c += inst.cost(w[0], w[1]);
    }
    c + inst.cost(order[order.len() - 1], 0)
}

fn nearest_neighbor(inst: &TspInstance) -> Vec<usize> {
    let n = inst.len();
    let mut used = vec![false; n];
    used[0] = true;
    let mut cur = 0;
    let mut order = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let next = (1..n)
            .filter(|&j| !used[j])
            .min_by(|&a, &b| inst.cost(cur, a).total_cmp(&inst.cost(cur, b)))
            .expect("unvisited node remains");
        used[next] = true;
        order.push(next);
        cur = next;
    }
    order
}

// First-improvement descent over segment reversals and or-opt moves
// (segments of length 1..=3 moved elsewhere, direction kept).
fn local_search(inst: &TspInstance, order: &mut Vec<usize>) {
    const EPS: f64 = 1e-12;
    let m = order.len();
    let mut cost = open_cost(inst, order);
    let mut improved = true;
    while improved {
        improved = false;
        'two_opt: for i in 0..m {
            for j in i + 1..m {
                let mut cand = order.clone();
                cand[i..=j].reverse();
                let c = open_cost(inst, &cand);
                if c < cost - EPS {
                    *order = cand;
                    cost = c;
                    improved = true;
                    break 'two_opt;
                }
            }
        }
        if improved {
            continue;
        }
        'or_opt: for len in 1..=3.min(m.saturating_sub(1)) {
            for i in 0..=m - len {
                let mut rest = order.clone();
                let seg: Vec<usize> = rest.drain(i..i + len).collect();
                for p in 0..=rest.len() {
                    if p == i {
                        continue;
                    }
                    let mut cand = rest.clone();
                    for (k, &s) in seg.iter().enumerate() {
                        cand.insert(p + k, s);
                    }
                    let c = open_cost(inst, &cand);
                    if c < cost - EPS {
                        *order = cand;
                        cost = c;
                        improved = true;
                        break 'or_opt;
                    }
                }
            }
        }
    }
}

/// Exact for small instances, heuristic otherwise.
pub fn solve(inst: &TspInstance, seed: u64) -> Tour {
    if inst.len() <= EXACT_MAX_NODES {
        solve_exact(inst).expect("size checked")
    } else {
        solve_heuristic(inst, seed, HeuristicBudget::default())
    }
}
