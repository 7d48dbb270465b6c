//! Depth-first branch-and-bound.
//!
//! The relaxation is an assignment problem over the customers plus `n`
//! copies of the depot: every node picks one successor, a copy either
//! starts a route or (only for copies beyond the fleet lower bound) points
//! to itself. Cycles through no copy are subtours. A relaxation whose
//! cycles decode into routes within Q/T̄/D̄ is feasible and closes the node.
//!
//! Branching is binary on an arc of a violating structure (include /
//! exclude), picked by strong branching over the three costliest
//! candidates. Fixed chains are checked against the route limits at every
//! node, with node-weighted shortest paths standing in for the unfixed
//! parts of a route.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::TcvrpInstance;
use crate::its::{solve_its, ItsConfig};
use crate::model::Solution;
use crate::FEAS_TOL;

const BIG: f64 = 1e12;
const OPT_TOL: f64 = 1e-6;
const PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Gap,
    Infeasible,
    Timeout,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Gap => "gap",
            Status::Infeasible => "infeasible",
            Status::Timeout => "timeout",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactResult {
    pub solution: Option<Solution>,
    /// ι, miles. Infinite only when the instance is proven infeasible.
    pub lower: f64,
    /// υ, miles.
    pub upper: Option<f64>,
    pub status: Status,
    pub elapsed_s: f64,
    pub nodes: u64,
}

impl ExactResult {
    /// Percent MIP gap, when an incumbent exists.
    pub fn gap(&self) -> Option<f64> {
        let u = self.upper?;
        if u == 0.0 {
            return Some(0.0);
        }
        Some(((1.0 - self.lower / u) * 100.0).max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExactConfig {
    pub time_limit_s: f64,
    /// Seed the incumbent with a short ITS run.
    pub warm_start: bool,
    pub warm_start_budget_s: f64,
    pub seed: u64,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            time_limit_s: 300.0,
            warm_start: true,
            warm_start_budget_s: 2.0,
            seed: 0,
        }
    }
}

/// Fixed arc decisions over instance nodes `0..=n` (0 is the depot).
#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    n: usize,
    succ: Vec<Option<usize>>,
    pred: Vec<Option<usize>>,
    excluded: Vec<bool>,
    /// Bound inherited from the parent; only used for pruning before evaluation.
    inherited: f64,
}

impl SearchNode {
    pub fn root(inst: &TcvrpInstance) -> Self {
        let n = inst.n();
        Self {
            n,
            succ: vec![None; n + 1],
            pred: vec![None; n + 1],
            excluded: vec![false; (n + 1) * (n + 1)],
            inherited: 0.0,
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    pub fn is_excluded(&self, i: usize, j: usize) -> bool {
        self.excluded[self.idx(i, j)]
    }

    pub fn is_included(&self, i: usize, j: usize) -> bool {
        if i == 0 {
            self.pred[j] == Some(0)
        } else {
            self.succ[i] == Some(j)
        }
    }

    /// Forces arc `(i, j)`. Returns false when that contradicts earlier decisions.
    pub fn include(&mut self, i: usize, j: usize) -> bool {
        if i == j || self.is_excluded(i, j) {
            return false;
        }
        if i != 0 {
            if self.succ[i].is_some_and(|s| s != j) {
                return false;
            }
            self.succ[i] = Some(j);
        }
        if j != 0 {
            if self.pred[j].is_some_and(|p| p != i) {
                return false;
            }
            self.pred[j] = Some(i);
        }
        true
    }

    /// Forbids arc `(i, j)`. Returns false when the arc was already forced.
    pub fn exclude(&mut self, i: usize, j: usize) -> bool {
        if self.is_included(i, j) {
            return false;
        }
        let k = self.idx(i, j);
        self.excluded[k] = true;
        true
    }

    fn allowed(&self, i: usize, j: usize) -> bool {
        if i == j || self.is_excluded(i, j) {
            return false;
        }
        if i != 0 && self.succ[i].is_some_and(|s| s != j) {
            return false;
        }
        if j != 0 && self.pred[j].is_some_and(|p| p != i) {
            return false;
        }
        true
    }

    /// Chains of fixed customer-to-customer arcs, or None on a fixed cycle.
    fn chains(&self) -> Option<Vec<Vec<usize>>> {
        let n = self.n;
        let mut out = Vec::new();
        let mut seen = vec![false; n + 1];
        for start in 1..=n {
            if self.pred[start].is_some_and(|p| p != 0) {
                continue;
            }
            let mut chain = vec![start];
            seen[start] = true;
            let mut v = start;
            while let Some(s) = self.succ[v].filter(|&s| s != 0) {
                chain.push(s);
                seen[s] = true;
                v = s;
            }
            out.push(chain);
        }
        // anything unseen sits on a customer-only cycle
        if (1..=n).any(|v| !seen[v]) {
            return None;
        }
        Some(out)
    }
}

/// Node-weighted all-pairs shortest paths: the cheapest way from `a` to `b`
/// counting arc costs plus the extra weight of every intermediate node.
fn through_paths(n: usize, arc: impl Fn(usize, usize) -> f64, weight: impl Fn(usize) -> f64) -> Vec<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = (0..=n)
        .map(|a| (0..=n).map(|b| if a == b { 0.0 } else { arc(a, b) }).collect())
        .collect();
    for v in 0..=n {
        let w = weight(v);
        for a in 0..=n {
            let av = m[a][v];
            for b in 0..=n {
                let cand = av + w + m[v][b];
                if cand < m[a][b] {
                    m[a][b] = cand;
                }
            }
        }
    }
    m
}

struct Context<'a> {
    inst: &'a TcvrpInstance,
    n: usize,
    kmin: usize,
    time_paths: Vec<Vec<f64>>,
    dist_paths: Vec<Vec<f64>>,
}

impl<'a> Context<'a> {
    fn new(inst: &'a TcvrpInstance) -> Self {
        let n = inst.n();
        let q = inst.capacity() as f64;
        let by_load = (inst.total_demand() as f64 / q).ceil() as usize;
        let by_time = (inst.services().iter().sum::<f64>() / inst.max_time() - FEAS_TOL).ceil().max(0.0) as usize;
        let kmin = if n == 0 { 0 } else { by_load.max(by_time).max(1).min(n) };
        Self {
            inst,
            n,
            kmin,
            time_paths: through_paths(n, |a, b| inst.time(a, b), |v| inst.service(v)),
            dist_paths: through_paths(n, |a, b| inst.dist(a, b), |_| 0.0),
        }
    }

    fn fits(&self, load: u64, time: f64, dist: f64) -> bool {
        load <= self.inst.capacity() as u64
            && time <= self.inst.max_time() + FEAS_TOL
            && self.inst.max_dist().map_or(true, |d| dist <= d + FEAS_TOL)
    }

    /// Lower bounds on the route through each fixed chain against the limits.
    fn propagate(&self, node: &SearchNode) -> bool {
        let inst = self.inst;
        let Some(chains) = node.chains() else {
            return false;
        };
        for chain in chains {
            let first = chain[0];
            let last = *chain.last().expect("nonempty chain");
            let mut load = 0u64;
            let mut time = 0.0;
            let mut dist = 0.0;
            for w in chain.windows(2) {
                time += inst.time(w[0], w[1]);
                dist += inst.dist(w[0], w[1]);
            }
            for &v in &chain {
                load += inst.demand(v) as u64;
                time += inst.service(v);
            }
            if node.pred[first] == Some(0) {
                time += inst.time(0, first);
                dist += inst.dist(0, first);
            } else {
                time += self.time_paths[0][first];
                dist += self.dist_paths[0][first];
            }
            if node.succ[last] == Some(0) {
                time += inst.time(last, 0);
                dist += inst.dist(last, 0);
            } else {
                time += self.time_paths[last][0];
                dist += self.dist_paths[last][0];
            }
            if !self.fits(load, time, dist) {
                return false;
            }
        }
        true
    }

    /// Assignment relaxation: total cost and each AP row's chosen column.
    /// Rows/columns `0..n` are customers `1..=n`, `n..2n` depot copies.
    fn relax(&self, node: &SearchNode) -> Option<(f64, Vec<usize>)> {
        let n = self.n;
        let m = 2 * n;
        let inst = self.inst;
        let orig = |a: usize| if a < n { a + 1 } else { 0 };
        let mut cost = vec![vec![BIG; m]; m];
        for a in 0..m {
            for b in 0..m {
                let (i, j) = (orig(a), orig(b));
                cost[a][b] = if a >= n && b >= n {
                    if a == b && a - n >= self.kmin {
                        0.0
                    } else {
                        BIG
                    }
                } else if node.allowed(i, j) {
                    inst.dist(i, j)
                } else {
                    BIG
                };
            }
        }
        let assign = hungarian(&cost);
        let mut total = 0.0;
        for (a, &b) in assign.iter().enumerate() {
            if cost[a][b] >= BIG {
                return None;
            }
            total += cost[a][b];
        }
        Some((total, assign))
    }

    fn evaluate(&self, node: &SearchNode) -> Option<(f64, Vec<usize>)> {
        if self.n == 0 {
            return Some((0.0, vec![]));
        }
        if !self.propagate(node) {
            return None;
        }
        self.relax(node)
    }

    /// Splits the relaxation into routes. Returns feasible routes, or the
    /// arcs of every subtour and infeasible route.
    fn decode(&self, assign: &[usize]) -> std::result::Result<Vec<Vec<usize>>, Vec<(usize, usize)>> {
        let n = self.n;
        let m = 2 * n;
        let orig = |a: usize| if a < n { a + 1 } else { 0 };
        let mut seen = vec![false; m];
        let mut routes = Vec::new();
        let mut bad: Vec<(usize, usize)> = Vec::new();
        for start in 0..m {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut v = assign[start];
            while v != start {
                seen[v] = true;
                cycle.push(v);
                v = assign[v];
            }
            let arcs = |c: &[usize]| -> Vec<(usize, usize)> {
                (0..c.len())
                    .map(|k| (orig(c[k]), orig(c[(k + 1) % c.len()])))
                    .collect()
            };
            let Some(rot) = cycle.iter().position(|&a| a >= n) else {
                bad.extend(arcs(&cycle));
                continue;
            };
            if cycle.len() == 1 {
                continue; // idle vehicle
            }
            cycle.rotate_left(rot);
            let mut route = vec![0];
            for &a in cycle.iter().skip(1).chain(std::iter::once(&cycle[0])) {
                if a >= n {
                    route.push(0);
                    if !self.route_fits(&route) {
                        bad.extend(route.windows(2).map(|w| (w[0], w[1])));
                    }
                    routes.push(std::mem::replace(&mut route, vec![0]));
                } else {
                    route.push(a + 1);
                }
            }
        }
        if bad.is_empty() {
            Ok(routes)
        } else {
            Err(bad)
        }
    }

    fn route_fits(&self, route: &[usize]) -> bool {
        let inst = self.inst;
        let mut load = 0u64;
        let mut time = 0.0;
        let mut dist = 0.0;
        for w in route.windows(2) {
            time += inst.time(w[0], w[1]);
            dist += inst.dist(w[0], w[1]);
        }
        for &v in route {
            load += inst.demand(v) as u64;
            time += inst.service(v);
        }
        self.fits(load, time, dist)
    }
}

/// Minimum-cost perfect assignment (Hungarian method, O(m^3)).
/// Returns, per row, the assigned column.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let m = cost.len();
    if m == 0 {
        return vec![];
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row = vec![0; m];
    for j in 1..=m {
        row[p[j] - 1] = j - 1;
    }
    row
}

/// Assignment-relaxation bound at `node`; `+inf` when the node admits no
/// completion within its fixed decisions.
pub fn lower_bound(node: &SearchNode, inst: &TcvrpInstance) -> f64 {
    Context::new(inst)
        .evaluate(node)
        .map_or(f64::INFINITY, |(b, _)| b)
}

pub fn solve_exact(inst: &TcvrpInstance, time_limit_s: f64) -> Result<ExactResult> {
    solve_exact_with(
        inst,
        &ExactConfig {
            time_limit_s,
            ..Default::default()
        },
    )
}

pub fn solve_exact_with(inst: &TcvrpInstance, cfg: &ExactConfig) -> Result<ExactResult> {
    let started = Instant::now();
    let ctx = Context::new(inst);
    let n = inst.n();
    let mut incumbent: Option<(f64, Vec<Vec<usize>>)> = None;

    if cfg.warm_start && n > 0 {
        let its = ItsConfig {
            seed: cfg.seed,
            time_budget_s: cfg.warm_start_budget_s.min(cfg.time_limit_s).max(1e-3),
            ..Default::default()
        };
        if let Ok(r) = solve_its(inst, &its) {
            incumbent = Some((r.cost, r.solution.routes));
        }
    }

    let root = SearchNode::root(inst);
    let mut lower = 0.0f64;
    let mut nodes = 0u64;
    let mut timed_out = false;
    // (node, bound if already evaluated)
    let mut stack: Vec<(SearchNode, Option<(f64, Vec<usize>)>)> = vec![(root, None)];
    let prune = |bound: f64, inc: &Option<(f64, Vec<Vec<usize>>)>| {
        inc.as_ref()
            .is_some_and(|(ub, _)| bound >= ub - PRUNE_TOL * ub.max(1.0))
    };

    while let Some((node, pre)) = stack.pop() {
        if started.elapsed().as_secs_f64() >= cfg.time_limit_s {
            stack.push((node, pre));
            timed_out = true;
            break;
        }
        nodes += 1;
        if prune(node.inherited, &incumbent) {
            continue;
        }
        let evaluated = match pre {
            Some(e) => Some(e),
            None => ctx.evaluate(&node),
        };
        let Some((bound, assign)) = evaluated else {
            continue;
        };
        if nodes == 1 {
            lower = bound;
        }
        if prune(bound, &incumbent) {
            continue;
        }
        let violating = match ctx.decode(&assign) {
            Ok(routes) => {
                incumbent = Some((bound, routes));
                continue;
            }
            Err(arcs) => arcs,
        };

        let mut candidates: Vec<(usize, usize)> = violating
            .into_iter()
            .filter(|&(i, j)| !node.is_included(i, j))
            .collect();
        candidates.sort_by(|a, b| {
            inst.dist(b.0, b.1)
                .total_cmp(&inst.dist(a.0, a.1))
                .then(a.cmp(b))
        });
        candidates.dedup();
        candidates.truncate(3);
        if candidates.is_empty() {
            // every violating arc is fixed; propagation should have caught it
            continue;
        }

        let mut chosen: Option<((usize, usize), SearchNode, Option<(f64, Vec<usize>)>)> = None;
        for &(i, j) in &candidates {
            let mut child = node.clone();
            if !child.exclude(i, j) {
                continue;
            }
            let eval = ctx.evaluate(&child);
            let score = eval.as_ref().map_or(f64::INFINITY, |e| e.0);
            let better = match &chosen {
                None => true,
                Some((arc, _, e)) => {
                    let s = e.as_ref().map_or(f64::INFINITY, |e| e.0);
                    score > s || (score == s && (i, j) < *arc)
                }
            };
            if better {
                chosen = Some(((i, j), child, eval));
            }
        }
        let Some(((i, j), mut excl, excl_eval)) = chosen else {
            continue;
        };
        if let Some(e) = excl_eval {
            excl.inherited = e.0;
            stack.push((excl, Some(e)));
        }
        let mut incl = node;
        if incl.include(i, j) {
            incl.inherited = bound;
            stack.push((incl, None));
        }

        let open = stack
            .iter()
            .map(|(s, _)| s.inherited)
            .fold(f64::INFINITY, f64::min);
        let ub = incumbent.as_ref().map_or(f64::INFINITY, |x| x.0);
        let cand = open.min(ub);
        if cand.is_finite() {
            lower = lower.max(cand);
        }
    }

    let elapsed_s = started.elapsed().as_secs_f64();
    if !timed_out {
        return Ok(match incumbent {
            Some((ub, routes)) => {
                let solution = Solution::from_routes(inst, routes)?;
                ExactResult {
                    lower: ub,
                    upper: Some(solution.vmt_mi),
                    solution: Some(solution),
                    status: Status::Optimal,
                    elapsed_s,
                    nodes,
                }
            }
            None => ExactResult {
                solution: None,
                lower: f64::INFINITY,
                upper: None,
                status: Status::Infeasible,
                elapsed_s,
                nodes,
            },
        });
    }
    let open = stack
        .iter()
        .map(|(s, _)| s.inherited)
        .fold(f64::INFINITY, f64::min);
    let ub = incumbent.as_ref().map(|x| x.0);
    let mut lower = lower.max(open.min(ub.unwrap_or(f64::INFINITY)).min(f64::MAX));
    if let Some(u) = ub {
        lower = lower.min(u);
    }
    Ok(match incumbent {
        Some((ub, routes)) => {
            let solution = Solution::from_routes(inst, routes)?;
            let status = if ub - lower <= OPT_TOL * ub.max(1.0) {
                Status::Optimal
            } else {
                Status::Gap
            };
            ExactResult {
                lower,
                upper: Some(solution.vmt_mi),
                solution: Some(solution),
                status,
                elapsed_s,
                nodes,
            }
        }
        None => ExactResult {
            solution: None,
            lower,
            upper: None,
            status: Status::Timeout,
            elapsed_s,
            nodes,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, q: u32) -> TcvrpInstance {
        // customers on a line at 1..=n miles from the depot
        let pos: Vec<f64> = (0..=n).map(|i| i as f64).collect();
        let d: Vec<Vec<f64>> = pos
            .iter()
            .map(|a| pos.iter().map(|b| (a - b).abs()).collect())
            .collect();
        let mut demand = vec![1u32; n + 1];
        demand[0] = 0;
        let mut service = vec![1.0; n + 1];
        service[0] = 0.0;
        TcvrpInstance::new(demand, service, d.clone(), d, q, 600.0, Some(200.0)).unwrap()
    }

    fn no_warm(limit: f64) -> ExactConfig {
        ExactConfig {
            time_limit_s: limit,
            warm_start: false,
            ..Default::default()
        }
    }

    #[test]
    fn hungarian_small() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&c);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn single_customer_forced() {
        let inst = line(1, 5);
        let r = solve_exact_with(&inst, &no_warm(10.0)).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert_eq!(r.upper, Some(2.0));
        assert_eq!(r.lower, 2.0);
        assert_eq!(r.solution.unwrap().routes, vec![vec![0, 1, 0]]);
    }

    #[test]
    fn capacity_forces_singletons() {
        let inst = line(4, 1);
        let r = solve_exact_with(&inst, &no_warm(10.0)).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.upper.unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(r.solution.unwrap().k, 4);
    }

    #[test]
    fn one_route_when_loose() {
        let inst = line(5, 10);
        let r = solve_exact(&inst, 10.0).unwrap();
        assert!((r.upper.unwrap() - 10.0).abs() < 1e-9);
        assert!(r.gap().unwrap().abs() < 1e-9);
    }

    #[test]
    fn bound_cases() {
        let inst = line(3, 10);
        let root = SearchNode::root(&inst);
        let opt = solve_exact_with(&inst, &no_warm(10.0)).unwrap().upper.unwrap();
        assert!(lower_bound(&root, &inst) <= opt + 1e-9);

        let mut fixed = SearchNode::root(&inst);
        for (i, j) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            assert!(fixed.include(i, j));
        }
        assert!((lower_bound(&fixed, &inst) - 6.0).abs() < 1e-9);

        let mut closed = SearchNode::root(&inst);
        for j in 1..=3 {
            closed.exclude(0, j);
        }
        assert_eq!(lower_bound(&closed, &inst), f64::INFINITY);
    }

    #[test]
    fn include_exclude_consistency() {
        let inst = line(3, 10);
        let mut s = SearchNode::root(&inst);
        assert!(s.include(1, 2));
        assert!(!s.include(1, 3));
        assert!(!s.include(3, 2));
        assert!(!s.exclude(1, 2));
        assert!(s.exclude(2, 3));
        assert!(!s.include(2, 3));
    }

    #[test]
    fn fixed_cycle_prunes() {
        let inst = line(3, 10);
        let mut s = SearchNode::root(&inst);
        s.include(1, 2);
        s.include(2, 1);
        assert_eq!(lower_bound(&s, &inst), f64::INFINITY);
    }

    #[test]
    fn timeout_brackets() {
        let inst = line(6, 2);
        let full = solve_exact_with(&inst, &no_warm(60.0)).unwrap();
        let cut = solve_exact_with(&inst, &ExactConfig { time_limit_s: 0.0, ..no_warm(0.0) }).unwrap();
        assert_eq!(cut.status, Status::Timeout);
        assert!(cut.lower <= full.upper.unwrap() + 1e-9);
    }
}
