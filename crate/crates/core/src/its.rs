//! Iterated tabu search.
//!
//! One run: parallel cheapest insertion, first-improvement descent, then
//! rounds of (tabu phase → descent → perturbation) until the time budget
//! runs out or `max_idle_rounds` rounds pass without a new best. Every
//! state visited is feasible; moves that would break a route limit are
//! never applied.
//!
//! Neighbourhoods, in evaluation order: relocate, swap, intra-route 2-opt
//! and inter-route 2-opt*. Relocate and swap are granular (restricted to
//! each customer's nearest neighbours) and are also the tabu-phase moves.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::TcvrpInstance;
use crate::model::Solution;

const IMPROVE: f64 = 1e-9;
const LIMIT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighborhoods {
    pub relocate: bool,
    pub swap: bool,
    pub two_opt: bool,
    pub two_opt_star: bool,
}

impl Default for Neighborhoods {
    fn default() -> Self {
        Self {
            relocate: true,
            swap: true,
            two_opt: true,
            two_opt_star: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ItsConfig {
    pub seed: u64,
    pub time_budget_s: f64,
    /// Independent constructions tried within one run; the best start is kept.
    pub restarts: usize,
    /// Tabu tenure in iterations; `None` uses `round(sqrt(n))`.
    pub tenure: Option<usize>,
    /// Customers ejected per perturbation; `None` uses `max(3, ceil(0.1 n))`.
    pub perturbation: Option<usize>,
    pub neighborhoods: Neighborhoods,
    /// Rounds without a new best before stopping.
    pub max_idle_rounds: usize,
    /// Tabu iterations per round; `None` uses `max(20, 2n)`.
    pub tabu_iterations: Option<usize>,
    /// Neighbour-list length for granular moves.
    pub granularity: usize,
    /// Whether moves may open a new route. Construction always may.
    pub open_routes: bool,
    /// Multiplicative noise on insertion costs during construction and
    /// perturbation: each cost is scaled by a draw from `[1, 1 + noise)`.
    pub insertion_noise: f64,
    /// Rounds without a new best after which the search resumes from the best.
    pub reset_after: usize,
}

impl Default for ItsConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            time_budget_s: 60.0,
            restarts: 1,
            tenure: None,
            perturbation: None,
            neighborhoods: Neighborhoods::default(),
            max_idle_rounds: 50,
            tabu_iterations: None,
            granularity: 30,
            open_routes: true,
            insertion_noise: 0.2,
            reset_after: 10,
        }
    }
}

impl ItsConfig {
    fn check(&self) -> Result<()> {
        if !(self.time_budget_s > 0.0) {
            return Err(Error::InvalidInput("ITS time budget must be positive".into()));
        }
        if self.tenure == Some(0) {
            return Err(Error::InvalidInput("tabu tenure must be at least 1".into()));
        }
        if !(self.insertion_noise >= 0.0) {
            return Err(Error::InvalidInput("insertion noise must be nonnegative".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidInput("ITS needs at least one start".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItsResult {
    pub solution: Solution,
    /// Best-found total distance.
    pub cost: f64,
    pub rounds: usize,
    pub elapsed_s: f64,
    /// Whether the run ended on the time budget rather than on idle rounds.
    pub timed_out: bool,
}

pub fn solve_its(inst: &TcvrpInstance, cfg: &ItsConfig) -> Result<ItsResult> {
    cfg.check()?;
    Search::new(inst, cfg).run(None)
}

/// Runs from a given feasible solution instead of a fresh construction.
pub fn solve_its_from(inst: &TcvrpInstance, cfg: &ItsConfig, start: &Solution) -> Result<ItsResult> {
    cfg.check()?;
    let report = crate::model::validate(inst, start)?;
    if !report.feasible {
        return Err(Error::InvalidInput("warm start is infeasible".into()));
    }
    Search::new(inst, cfg).run(Some(start))
}

/// Best of `runs` independent runs seeded `seed, seed + 1, ..`; ties go to
/// the lowest seed. Runs execute in parallel.
pub fn best_of_runs(inst: &TcvrpInstance, cfg: &ItsConfig, runs: usize) -> Result<ItsResult> {
    best_of_runs_from(inst, cfg, runs, None)
}

pub fn best_of_runs_from(
    inst: &TcvrpInstance,
    cfg: &ItsConfig,
    runs: usize,
    start: Option<&Solution>,
) -> Result<ItsResult> {
    if runs == 0 {
        return Err(Error::InvalidInput("runs must be at least 1".into()));
    }
    let results: Vec<Result<ItsResult>> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let c = ItsConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                ..cfg.clone()
            };
            match start {
                Some(s) => solve_its_from(inst, &c, s),
                None => solve_its(inst, &c),
            }
        })
        .collect();
    let mut best: Option<ItsResult> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(r) => {
                if best.as_ref().map_or(true, |b| r.cost < b.cost) {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one run"))
}

#[derive(Debug, Clone, Default)]
struct Route {
    nodes: Vec<usize>,
    load: u64,
    // prefix/suffix caches; index k covers nodes[..k] / nodes[k..]
    pre_time: Vec<f64>,
    pre_dist: Vec<f64>,
    pre_load: Vec<u64>,
    suf_time: Vec<f64>,
    suf_dist: Vec<f64>,
    // forward / reverse internal arc sums for 2-opt
    fwd_time: Vec<f64>,
    rev_time: Vec<f64>,
    fwd_dist: Vec<f64>,
    rev_dist: Vec<f64>,
    time: f64,
    dist: f64,
}

impl Route {
    fn refresh(&mut self, inst: &TcvrpInstance) {
        let n = &self.nodes;
        let l = n.len();
        self.pre_time.clear();
        self.pre_dist.clear();
        self.pre_load.clear();
        self.pre_time.push(0.0);
        self.pre_dist.push(0.0);
        self.pre_load.push(0);
        let mut prev = 0;
        let (mut t, mut d, mut q) = (0.0, 0.0, 0u64);
        for &v in n {
            t += inst.time(prev, v) + inst.service(v);
            d += inst.dist(prev, v);
            q += inst.demand(v) as u64;
            self.pre_time.push(t);
            self.pre_dist.push(d);
            self.pre_load.push(q);
            prev = v;
        }
        self.suf_time = vec![0.0; l + 1];
        self.suf_dist = vec![0.0; l + 1];
        let mut next = 0;
        let (mut t, mut d) = (0.0, 0.0);
        for k in (0..l).rev() {
            let v = n[k];
            t += inst.time(v, next) + inst.service(v);
            d += inst.dist(v, next);
            self.suf_time[k] = t;
            self.suf_dist[k] = d;
            next = v;
        }
        self.fwd_time = vec![0.0; l.max(1)];
        self.rev_time = vec![0.0; l.max(1)];
        self.fwd_dist = vec![0.0; l.max(1)];
        self.rev_dist = vec![0.0; l.max(1)];
        for k in 1..l {
            self.fwd_time[k] = self.fwd_time[k - 1] + inst.time(n[k - 1], n[k]);
            self.rev_time[k] = self.rev_time[k - 1] + inst.time(n[k], n[k - 1]);
            self.fwd_dist[k] = self.fwd_dist[k - 1] + inst.dist(n[k - 1], n[k]);
            self.rev_dist[k] = self.rev_dist[k - 1] + inst.dist(n[k], n[k - 1]);
        }
        self.load = q;
        if l == 0 {
            self.time = 0.0;
            self.dist = 0.0;
        } else {
            self.time = self.pre_time[l] + inst.time(n[l - 1], 0);
            self.dist = self.pre_dist[l] + inst.dist(n[l - 1], 0);
        }
    }

    fn prev(&self, k: usize) -> usize {
        if k == 0 {
            0
        } else {
            self.nodes[k - 1]
        }
    }

    fn next(&self, k: usize) -> usize {
        self.nodes.get(k + 1).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy)]
enum Move {
    /// customer, target route, insert index in the target (before removal)
    Relocate { c: usize, to: usize, at: usize },
    Swap { a: usize, b: usize },
    TwoOpt { r: usize, i: usize, j: usize },
    /// route a keeps nodes[..i] and takes b's nodes[j..]; b the reverse
    TwoOptStar { ra: usize, i: usize, rb: usize, j: usize },
}

#[derive(Debug, Clone)]
struct State {
    routes: Vec<Route>,
    // customer -> (route, index)
    pos: Vec<(usize, usize)>,
    cost: f64,
}

impl State {
    fn from_routes(inst: &TcvrpInstance, lists: Vec<Vec<usize>>) -> Self {
        let mut s = State {
            routes: lists
                .into_iter()
                .map(|nodes| Route {
                    nodes,
                    ..Default::default()
                })
                .collect(),
            pos: vec![(usize::MAX, 0); inst.n() + 1],
            cost: 0.0,
        };
        for r in 0..s.routes.len() {
            s.touch(inst, r);
        }
        s.recost();
        s
    }

    fn touch(&mut self, inst: &TcvrpInstance, r: usize) {
        self.routes[r].refresh(inst);
        for (k, &v) in self.routes[r].nodes.iter().enumerate() {
            self.pos[v] = (r, k);
        }
    }

    fn recost(&mut self) {
        self.cost = self.routes.iter().map(|r| r.dist).sum();
    }

    fn to_solution(&self, inst: &TcvrpInstance) -> Result<Solution> {
        Solution::from_customer_routes(inst, self.routes.iter().map(|r| r.nodes.as_slice()))
    }

    fn empty_slot(&mut self) -> usize {
        match self.routes.iter().position(|r| r.nodes.is_empty()) {
            Some(r) => r,
            None => {
                self.routes.push(Route::default());
                self.routes.len() - 1
            }
        }
    }
}

struct Search<'a> {
    inst: &'a TcvrpInstance,
    cfg: &'a ItsConfig,
    n: usize,
    neighbors: Vec<Vec<usize>>,
    tenure: usize,
    deadline: Instant,
    started: Instant,
    timed_out: bool,
}

impl<'a> Search<'a> {
    fn new(inst: &'a TcvrpInstance, cfg: &'a ItsConfig) -> Self {
        let n = inst.n();
        let g = cfg.granularity.max(1).min(n.saturating_sub(1));
        let mut neighbors = vec![Vec::new(); n + 1];
        for c in 1..=n {
            let mut others: Vec<usize> = (1..=n).filter(|&v| v != c).collect();
            others.sort_by(|&a, &b| {
                let da = inst.dist(c, a) + inst.dist(a, c);
                let db = inst.dist(c, b) + inst.dist(b, c);
                da.total_cmp(&db).then(a.cmp(&b))
            });
            others.truncate(g);
            neighbors[c] = others;
        }
        let started = Instant::now();
        Self {
            inst,
            cfg,
            n,
            neighbors,
            tenure: cfg
                .tenure
                .unwrap_or_else(|| ((n as f64).sqrt().round() as usize).max(1)),
            deadline: started + Duration::from_secs_f64(cfg.time_budget_s.min(1e9)),
            started,
            timed_out: false,
        }
    }

    fn out_of_time(&mut self) -> bool {
        if Instant::now() >= self.deadline {
            self.timed_out = true;
        }
        self.timed_out
    }

    fn fits(&self, load: u64, time: f64, dist: f64) -> bool {
        load <= self.inst.capacity() as u64
            && time <= self.inst.max_time() + LIMIT_TOL
            && self.inst.max_dist().map_or(true, |d| dist <= d + LIMIT_TOL)
    }

    fn run(mut self, start: Option<&Solution>) -> Result<ItsResult> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        if self.n == 0 {
            return Ok(ItsResult {
                solution: Solution::from_routes(self.inst, vec![])?,
                cost: 0.0,
                rounds: 0,
                elapsed_s: 0.0,
                timed_out: false,
            });
        }
        let mut current = match start {
            Some(s) => State::from_routes(
                self.inst,
                s.routes
                    .iter()
                    .map(|r| r.iter().copied().filter(|&v| v != 0).collect())
                    .collect(),
            ),
            None => {
                let mut best_start: Option<State> = None;
                for _ in 0..self.cfg.restarts {
                    let mut s = self.construct(&mut rng)?;
                    self.descend(&mut s, &mut rng);
                    if best_start.as_ref().map_or(true, |b| s.cost < b.cost - IMPROVE) {
                        best_start = Some(s);
                    }
                }
                best_start.expect("restarts >= 1")
            }
        };
        if start.is_some() {
            self.descend(&mut current, &mut rng);
        }
        let mut best = current.clone();
        let mut idle = 0;
        let mut rounds = 0;
        let tabu_iters = self
            .cfg
            .tabu_iterations
            .unwrap_or_else(|| (2 * self.n).max(20));
        while idle < self.cfg.max_idle_rounds && !self.out_of_time() {
            rounds += 1;
            self.tabu_phase(&mut current, &mut best, tabu_iters);
            self.descend(&mut current, &mut rng);
            if current.cost < best.cost - IMPROVE {
                best = current.clone();
                idle = 0;
            } else {
                idle += 1;
                if self.cfg.reset_after > 0 && idle % self.cfg.reset_after == 0 {
                    current = best.clone();
                }
            }
            self.perturb(&mut current, &mut rng);
        }
        let solution = best.to_solution(self.inst)?;
        Ok(ItsResult {
            cost: solution.vmt_mi,
            solution,
            rounds,
            elapsed_s: self.started.elapsed().as_secs_f64(),
            timed_out: self.timed_out,
        })
    }

    fn noise(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.cfg.insertion_noise > 0.0 {
            1.0 + rng.gen::<f64>() * self.cfg.insertion_noise
        } else {
            1.0
        }
    }

    /// Parallel cheapest insertion under noisy costs; new routes are seeded
    /// with one of the three unrouted customers farthest from the depot.
    fn construct(&self, rng: &mut ChaCha8Rng) -> Result<State> {
        let inst = self.inst;
        let mut unrouted: Vec<usize> = (1..=self.n).collect();
        let mut state = State::from_routes(inst, vec![]);
        let far = |v: usize| inst.dist(0, v) + inst.dist(v, 0);
        while !unrouted.is_empty() {
            // cheapest feasible insertion over all open routes
            let mut best: Option<(f64, usize, usize, usize)> = None;
            for (ui, &c) in unrouted.iter().enumerate() {
                for (r, route) in state.routes.iter().enumerate() {
                    if let Some((delta, at)) = self.best_insertion(route, c) {
                        let delta = delta * self.noise(rng);
                        if best.map_or(true, |b| delta < b.0) {
                            best = Some((delta, ui, r, at));
                        }
                    }
                }
            }
            match best {
                Some((_, ui, r, at)) => {
                    let c = unrouted.swap_remove(ui);
                    state.routes[r].nodes.insert(at, c);
                    state.touch(inst, r);
                }
                None => {
                    let mut order: Vec<usize> = (0..unrouted.len()).collect();
                    order.sort_by(|&a, &b| {
                        far(unrouted[b])
                            .total_cmp(&far(unrouted[a]))
                            .then(unrouted[a].cmp(&unrouted[b]))
                    });
                    let pick = if self.cfg.insertion_noise > 0.0 {
                        order[rng.gen_range(0..order.len().min(3))]
                    } else {
                        order[0]
                    };
                    let c = unrouted[pick];
                    let single = Route {
                        nodes: vec![c],
                        ..Default::default()
                    };
                    let mut single = single;
                    single.refresh(inst);
                    if !self.fits(single.load, single.time, single.dist) {
                        return Err(Error::Construction { node: c });
                    }
                    unrouted.swap_remove(pick);
                    state.routes.push(single);
                    let r = state.routes.len() - 1;
                    state.touch(inst, r);
                }
            }
        }
        state.recost();
        Ok(state)
    }

    /// Cheapest feasible position for `c` in `route`: (distance delta, index).
    fn best_insertion(&self, route: &Route, c: usize) -> Option<(f64, usize)> {
        let inst = self.inst;
        if route.nodes.is_empty() || route.load + inst.demand(c) as u64 > inst.capacity() as u64 {
            return None;
        }
        let mut best: Option<(f64, usize)> = None;
        for at in 0..=route.nodes.len() {
            let a = route.prev(at);
            let b = route.nodes.get(at).copied().unwrap_or(0);
            let dd = inst.dist(a, c) + inst.dist(c, b) - inst.dist(a, b);
            let dt = inst.time(a, c) + inst.service(c) + inst.time(c, b) - inst.time(a, b);
            if self.fits(route.load + inst.demand(c) as u64, route.time + dt, route.dist + dd)
                && best.map_or(true, |x| dd < x.0)
            {
                best = Some((dd, at));
            }
        }
        best
    }

    fn apply(&self, s: &mut State, mv: Move) {
        let inst = self.inst;
        match mv {
            Move::Relocate { c, to, at } => {
                let (from, k) = s.pos[c];
                if to == s.routes.len() {
                    s.routes.push(Route::default());
                }
                s.routes[from].nodes.remove(k);
                let at = if from == to && at > k { at - 1 } else { at };
                s.routes[to].nodes.insert(at, c);
                s.touch(inst, from);
                if to != from {
                    s.touch(inst, to);
                }
            }
            Move::Swap { a, b } => {
                let (ra, ka) = s.pos[a];
                let (rb, kb) = s.pos[b];
                s.routes[ra].nodes[ka] = b;
                s.routes[rb].nodes[kb] = a;
                s.touch(inst, ra);
                s.touch(inst, rb);
            }
            Move::TwoOpt { r, i, j } => {
                s.routes[r].nodes[i..=j].reverse();
                s.touch(inst, r);
            }
            Move::TwoOptStar { ra, i, rb, j } => {
                let tail_a = s.routes[ra].nodes.split_off(i);
                let tail_b = s.routes[rb].nodes.split_off(j);
                s.routes[ra].nodes.extend(tail_b);
                s.routes[rb].nodes.extend(tail_a);
                s.touch(inst, ra);
                s.touch(inst, rb);
            }
        }
        s.recost();
    }

    /// Distance delta of relocating `c` to index `at` of route `to`, or None
    /// when infeasible or a no-op.
    fn relocate_delta(&self, s: &State, c: usize, to: usize, at: usize) -> Option<f64> {
        let inst = self.inst;
        let (from, k) = s.pos[c];
        let src = &s.routes[from];
        if from == to && (at == k || at == k + 1) {
            return None;
        }
        let p = src.prev(k);
        let nx = src.next(k);
        let rem_d = inst.dist(p, nx) - inst.dist(p, c) - inst.dist(c, nx);
        let rem_t = inst.time(p, nx) - inst.time(p, c) - inst.time(c, nx) - inst.service(c);
        let dst = &s.routes[to];
        let a = dst.prev(at);
        let b = dst.nodes.get(at).copied().unwrap_or(0);
        let ins_d = inst.dist(a, c) + inst.dist(c, b) - inst.dist(a, b);
        let ins_t = inst.time(a, c) + inst.service(c) + inst.time(c, b) - inst.time(a, b);
        if from == to {
            if !self.fits(src.load, src.time + rem_t + ins_t, src.dist + rem_d + ins_d) {
                return None;
            }
        } else {
            let q = inst.demand(c) as u64;
            if !self.fits(dst.load + q, dst.time + ins_t, dst.dist + ins_d) {
                return None;
            }
        }
        Some(rem_d + ins_d)
    }

    /// Delta of moving `c` into a fresh route of its own.
    fn open_route_delta(&self, s: &State, c: usize) -> Option<f64> {
        if !self.cfg.open_routes {
            return None;
        }
        let inst = self.inst;
        let (from, k) = s.pos[c];
        let src = &s.routes[from];
        if src.nodes.len() == 1 {
            return None;
        }
        let p = src.prev(k);
        let nx = src.next(k);
        let rem_d = inst.dist(p, nx) - inst.dist(p, c) - inst.dist(c, nx);
        Some(rem_d + inst.dist(0, c) + inst.dist(c, 0))
    }

    fn swap_delta(&self, s: &State, a: usize, b: usize) -> Option<f64> {
        let inst = self.inst;
        let (ra, ka) = s.pos[a];
        let (rb, kb) = s.pos[b];
        if ra == rb {
            return None;
        }
        let side = |r: &Route, k: usize, out: usize, inn: usize| {
            let p = r.prev(k);
            let nx = r.next(k);
            let dd = inst.dist(p, inn) + inst.dist(inn, nx) - inst.dist(p, out) - inst.dist(out, nx);
            let dt = inst.time(p, inn) + inst.time(inn, nx) + inst.service(inn)
                - inst.time(p, out)
                - inst.time(out, nx)
                - inst.service(out);
            let dq = inst.demand(inn) as i64 - inst.demand(out) as i64;
            (dd, dt, dq)
        };
        let (rta, rtb) = (&s.routes[ra], &s.routes[rb]);
        let (dda, dta, dqa) = side(rta, ka, a, b);
        let (ddb, dtb, dqb) = side(rtb, kb, b, a);
        if !self.fits((rta.load as i64 + dqa) as u64, rta.time + dta, rta.dist + dda)
            || !self.fits((rtb.load as i64 + dqb) as u64, rtb.time + dtb, rtb.dist + ddb)
        {
            return None;
        }
        Some(dda + ddb)
    }

    fn two_opt_delta(&self, r: &Route, i: usize, j: usize) -> Option<f64> {
        let inst = self.inst;
        let (ni, nj) = (r.nodes[i], r.nodes[j]);
        let p = r.prev(i);
        let nx = r.next(j);
        let d_old = inst.dist(p, ni) + (r.fwd_dist[j] - r.fwd_dist[i]) + inst.dist(nj, nx);
        let d_new = inst.dist(p, nj) + (r.rev_dist[j] - r.rev_dist[i]) + inst.dist(ni, nx);
        let t_old = inst.time(p, ni) + (r.fwd_time[j] - r.fwd_time[i]) + inst.time(nj, nx);
        let t_new = inst.time(p, nj) + (r.rev_time[j] - r.rev_time[i]) + inst.time(ni, nx);
        let dd = d_new - d_old;
        self.fits(r.load, r.time + t_new - t_old, r.dist + dd)
            .then_some(dd)
    }

    fn two_opt_star_delta(&self, s: &State, ra: usize, i: usize, rb: usize, j: usize) -> Option<f64> {
        let inst = self.inst;
        let (a, b) = (&s.routes[ra], &s.routes[rb]);
        let la = if i == 0 { 0 } else { a.nodes[i - 1] };
        let fb = b.nodes.get(j).copied().unwrap_or(0);
        let lb = if j == 0 { 0 } else { b.nodes[j - 1] };
        let fa = a.nodes.get(i).copied().unwrap_or(0);
        let join = |pre_t: f64, pre_d: f64, x: usize, y: usize, suf_t: f64, suf_d: f64, empty: bool| {
            if empty {
                (0.0, 0.0)
            } else {
                (pre_t + inst.time(x, y) + suf_t, pre_d + inst.dist(x, y) + suf_d)
            }
        };
        let a_empty = i == 0 && j == b.nodes.len();
        let b_empty = j == 0 && i == a.nodes.len();
        let (ta, da) = join(a.pre_time[i], a.pre_dist[i], la, fb, b.suf_time[j], b.suf_dist[j], a_empty);
        let (tb, db) = join(b.pre_time[j], b.pre_dist[j], lb, fa, a.suf_time[i], a.suf_dist[i], b_empty);
        let qa = a.pre_load[i] + (b.load - b.pre_load[j]);
        let qb = b.pre_load[j] + (a.load - a.pre_load[i]);
        if !self.fits(qa, ta, da) || !self.fits(qb, tb, db) {
            return None;
        }
        Some(da + db - a.dist - b.dist)
    }

    /// Insertion indices adjacent to neighbour `v`: right before and right after it.
    fn slots_near(&self, s: &State, v: usize) -> [(usize, usize); 2] {
        let (r, k) = s.pos[v];
        [(r, k), (r, k + 1)]
    }

    /// First-improvement descent until no neighbourhood improves.
    fn descend(&self, s: &mut State, rng: &mut ChaCha8Rng) {
        let mut order: Vec<usize> = (1..=self.n).collect();
        order.shuffle(rng);
        loop {
            let mv = self
                .first_relocate(s, &order)
                .or_else(|| self.first_swap(s, &order))
                .or_else(|| self.first_two_opt(s))
                .or_else(|| self.first_two_opt_star(s, &order));
            match mv {
                Some(mv) => self.apply(s, mv),
                None => break,
            }
        }
    }

    fn first_relocate(&self, s: &State, order: &[usize]) -> Option<Move> {
        if !self.cfg.neighborhoods.relocate {
            return None;
        }
        for &c in order {
            for &v in &self.neighbors[c] {
                for (to, at) in self.slots_near(s, v) {
                    if let Some(d) = self.relocate_delta(s, c, to, at) {
                        if d < -IMPROVE {
                            return Some(Move::Relocate { c, to, at });
                        }
                    }
                }
            }
            if let Some(d) = self.open_route_delta(s, c) {
                if d < -IMPROVE {
                    let to = s.routes.iter().position(|r| r.nodes.is_empty()).unwrap_or(s.routes.len());
                    return Some(Move::Relocate { c, to, at: 0 });
                }
            }
        }
        None
    }

    fn first_swap(&self, s: &State, order: &[usize]) -> Option<Move> {
        if !self.cfg.neighborhoods.swap {
            return None;
        }
        for &a in order {
            for &b in &self.neighbors[a] {
                if let Some(d) = self.swap_delta(s, a, b) {
                    if d < -IMPROVE {
                        return Some(Move::Swap { a, b });
                    }
                }
            }
        }
        None
    }

    fn first_two_opt(&self, s: &State) -> Option<Move> {
        if !self.cfg.neighborhoods.two_opt {
            return None;
        }
        for (r, route) in s.routes.iter().enumerate() {
            let l = route.nodes.len();
            for i in 0..l {
                for j in i + 1..l {
                    if let Some(d) = self.two_opt_delta(route, i, j) {
                        if d < -IMPROVE {
                            return Some(Move::TwoOpt { r, i, j });
                        }
                    }
                }
            }
        }
        None
    }

    fn first_two_opt_star(&self, s: &State, order: &[usize]) -> Option<Move> {
        if !self.cfg.neighborhoods.two_opt_star {
            return None;
        }
        for &c in order {
            let (ra, ka) = s.pos[c];
            for &v in &self.neighbors[c] {
                let (rb, kb) = s.pos[v];
                if ra == rb {
                    continue;
                }
                // new arc c -> v; also try v's predecessor -> c's successor
                for (x, i, y, j) in [(ra, ka + 1, rb, kb), (rb, kb, ra, ka + 1)] {
                    if let Some(d) = self.two_opt_star_delta(s, x, i, y, j) {
                        if d < -IMPROVE {
                            return Some(Move::TwoOptStar { ra: x, i, rb: y, j });
                        }
                    }
                }
            }
        }
        None
    }

    /// Best admissible relocate/swap per iteration, worsening moves allowed.
    /// A move is tabu when it puts a customer back into a route it left
    /// within the tenure, unless it yields a new global best.
    fn tabu_phase(&mut self, s: &mut State, best: &mut State, iterations: usize) {
        let mut tabu: HashMap<(usize, usize), usize> = HashMap::new();
        let is_tabu = |tabu: &HashMap<(usize, usize), usize>, c: usize, r: usize, it: usize| {
            tabu.get(&(c, r)).is_some_and(|&until| it < until)
        };
        for it in 0..iterations {
            if it % 16 == 0 && self.out_of_time() {
                break;
            }
            let mut chosen: Option<(f64, Move)> = None;
            let mut consider = |d: f64, mv: Move, tabu_hit: bool| {
                let aspires = s.cost + d < best.cost - IMPROVE;
                if tabu_hit && !aspires {
                    return;
                }
                if chosen.map_or(true, |(bd, _)| d < bd - IMPROVE) {
                    chosen = Some((d, mv));
                }
            };
            for c in 1..=self.n {
                if self.cfg.neighborhoods.relocate {
                    for &v in &self.neighbors[c] {
                        for (to, at) in self.slots_near(s, v) {
                            if let Some(d) = self.relocate_delta(s, c, to, at) {
                                consider(d, Move::Relocate { c, to, at }, is_tabu(&tabu, c, to, it));
                            }
                        }
                    }
                    if let Some(d) = self.open_route_delta(s, c) {
                        let to = s.routes.iter().position(|r| r.nodes.is_empty()).unwrap_or(s.routes.len());
                        consider(d, Move::Relocate { c, to, at: 0 }, false);
                    }
                }
                if self.cfg.neighborhoods.swap {
                    for &v in &self.neighbors[c] {
                        if v < c {
                            continue;
                        }
                        if let Some(d) = self.swap_delta(s, c, v) {
                            let (rc, _) = s.pos[c];
                            let (rv, _) = s.pos[v];
                            let hit = is_tabu(&tabu, c, rv, it) || is_tabu(&tabu, v, rc, it);
                            consider(d, Move::Swap { a: c, b: v }, hit);
                        }
                    }
                }
            }
            let Some((_, mv)) = chosen else { break };
            match mv {
                Move::Relocate { c, .. } => {
                    tabu.insert((c, s.pos[c].0), it + 1 + self.tenure);
                }
                Move::Swap { a, b } => {
                    tabu.insert((a, s.pos[a].0), it + 1 + self.tenure);
                    tabu.insert((b, s.pos[b].0), it + 1 + self.tenure);
                }
                _ => {}
            }
            self.apply(s, mv);
            if s.cost < best.cost - IMPROVE {
                *best = s.clone();
            }
        }
    }

    /// Ejects random customers and reinserts each at its cheapest feasible
    /// position. Reverts when some customer fits nowhere and new routes
    /// are disabled.
    fn perturb(&self, s: &mut State, rng: &mut ChaCha8Rng) {
        let inst = self.inst;
        let k = self
            .cfg
            .perturbation
            .unwrap_or_else(|| ((0.1 * self.n as f64).ceil() as usize).max(3))
            .clamp(1, self.n);
        let backup = s.clone();
        let mut picked: Vec<usize> = rand::seq::index::sample(rng, self.n, k)
            .into_iter()
            .map(|i| i + 1)
            .collect();
        for &c in &picked {
            let (r, idx) = s.pos[c];
            s.routes[r].nodes.remove(idx);
            s.touch(inst, r);
        }
        picked.shuffle(rng);
        for c in picked {
            let mut best: Option<(f64, usize, usize)> = None;
            for (r, route) in s.routes.iter().enumerate() {
                if let Some((d, at)) = self.best_insertion(route, c) {
                    let d = d * self.noise(rng);
                    if best.map_or(true, |b| d < b.0) {
                        best = Some((d, r, at));
                    }
                }
            }
            let (r, at) = match best {
                Some((_, r, at)) => (r, at),
                None if self.cfg.open_routes => (s.empty_slot(), 0),
                None => {
                    *s = backup;
                    return;
                }
            };
            s.routes[r].nodes.insert(at, c);
            s.touch(inst, r);
        }
        s.recost();
    }
}
