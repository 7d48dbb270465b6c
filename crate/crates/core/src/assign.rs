//! Provider split and capacitated customer-to-depot assignment.

use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CustomerId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn manhattan(&self, other: &Point) -> f64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub id: CustomerId,
    pub x: f64,
    pub y: f64,
    #[serde(default = "one")]
    pub demand: u32,
}

impl Customer {
    pub fn new(id: CustomerId, x: f64, y: f64) -> Self {
        Self { id, x, y, demand: 1 }
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Ordered provider shares summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSplit(Vec<(String, f64)>);

impl ProviderSplit {
    pub fn new(shares: Vec<(String, f64)>) -> Result<Self> {
        if shares.is_empty() {
            return Err(Error::InvalidShares("no providers".into()));
        }
        let mut names: Vec<&str> = shares.iter().map(|(n, _)| n.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidShares("duplicate provider".into()));
        }
        if let Some((n, s)) = shares.iter().find(|(_, s)| !(0.0..=1.0).contains(s)) {
            return Err(Error::InvalidShares(format!("{n} has share {s} outside [0, 1]")));
        }
        let total: f64 = shares.iter().map(|(_, s)| s).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidShares(format!("shares sum to {total}, not 1")));
        }
        Ok(Self(shares))
    }

    /// Market shares of Amazon, FedEx, UPS and USPS.
    pub fn national() -> Self {
        Self::new(vec![
            ("Amazon".into(), 0.21),
            ("FedEx".into(), 0.16),
            ("UPS".into(), 0.24),
            ("USPS".into(), 0.39),
        ])
        .expect("shares sum to one")
    }

    /// Drops `provider` and spreads its share equally over the rest.
    pub fn without(&self, provider: &str) -> Result<Self> {
        let removed = self
            .0
            .iter()
            .find(|(n, _)| n == provider)
            .map(|(_, s)| *s)
            .ok_or_else(|| Error::InvalidShares(format!("unknown provider {provider}")))?;
        let rest: Vec<_> = self.0.iter().filter(|(n, _)| n != provider).collect();
        if rest.is_empty() {
            return Err(Error::InvalidShares("cannot remove the only provider".into()));
        }
        let add = removed / rest.len() as f64;
        Self::new(rest.into_iter().map(|(n, s)| (n.clone(), s + add)).collect())
    }

    pub fn shares(&self) -> &[(String, f64)] {
        &self.0
    }

    pub fn providers(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(n, _)| n.as_str())
    }
}

/// Draws one provider per customer, independently, with the split's
/// probabilities.
pub fn split_by_provider(
    customers: &[Customer],
    split: &ProviderSplit,
    seed: u64,
) -> BTreeMap<String, Vec<Customer>> {
    let mut out: BTreeMap<String, Vec<Customer>> = BTreeMap::new();
    if customers.is_empty() {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = split.0.len() - 1;
    for c in customers {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = last;
        for (k, (_, s)) in split.0.iter().enumerate() {
            acc += s;
            if u < acc {
                pick = k;
                break;
            }
        }
        out.entry(split.0[pick].0.clone()).or_default().push(*c);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepotSite {
    pub id: String,
    pub x: f64,
    pub y: f64,
    /// Maximum number of customers.
    pub capacity: u64,
}

impl DepotSite {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Default depot capacity: `ceil(slack * customers / depots)`.
pub fn default_capacity(customers: usize, depots: usize, slack: f64) -> u64 {
    if depots == 0 {
        return 0;
    }
    (slack * customers as f64 / depots as f64).ceil() as u64
}

/// Depot id → assigned customer ids, in depot input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepotAssignment {
    pub depots: Vec<(String, Vec<CustomerId>)>,
    /// Total Manhattan distance between customers and their depots.
    pub total_distance: f64,
}

impl DepotAssignment {
    pub fn customers_of(&self, depot: &str) -> Option<&[CustomerId]> {
        self.depots
            .iter()
            .find(|(d, _)| d == depot)
            .map(|(_, c)| c.as_slice())
    }

    /// JSON object mapping depot id to customer ids.
    pub fn to_json_string(&self) -> Result<String> {
        let map: BTreeMap<&str, &Vec<CustomerId>> =
            self.depots.iter().map(|(d, c)| (d.as_str(), c)).collect();
        Ok(serde_json::to_string(&map)?)
    }
}

/// Minimum total Manhattan distance assignment of customers to depots
/// under depot capacities, solved as a min-cost flow.
pub fn assign_to_depots(customers: &[Customer], depots: &[DepotSite]) -> Result<DepotAssignment> {
    let capacity: u64 = depots.iter().map(|d| d.capacity).sum();
    let need = customers.len() as u64;
    if capacity < need {
        return Err(Error::InsufficientCapacity {
            capacity,
            customers: need,
            shortfall: need - capacity,
        });
    }
    let m = depots.len();
    let n = customers.len();
    // source, customers, depots, sink
    let source = 0;
    let sink = n + m + 1;
    let mut g = MinCostFlow::new(n + m + 2);
    for (i, c) in customers.iter().enumerate() {
        g.add_edge(source, 1 + i, 1, 0.0);
        for (j, d) in depots.iter().enumerate() {
            g.add_edge(1 + i, 1 + n + j, 1, c.point().manhattan(&d.point()));
        }
    }
    for (j, d) in depots.iter().enumerate() {
        g.add_edge(1 + n + j, sink, d.capacity.min(need) as i64, 0.0);
    }
    let (flow, cost) = g.run(source, sink, need as i64);
    debug_assert_eq!(flow as u64, need);

    let mut lists: Vec<Vec<CustomerId>> = vec![Vec::new(); m];
    for (i, c) in customers.iter().enumerate() {
        let node = 1 + i;
        let j = g.adj[node]
            .iter()
            .map(|&e| &g.edges[e])
            .find(|e| e.to > n && e.to <= n + m && e.cap == 0 && e.orig_cap == 1)
            .map(|e| e.to - 1 - n)
            .expect("every customer carries one unit");
        lists[j].push(c.id);
    }
    Ok(DepotAssignment {
        depots: depots.iter().map(|d| d.id.clone()).zip(lists).collect(),
        total_distance: cost,
    })
}

#[derive(Debug, Clone)]
struct FlowEdge {
    to: usize,
    cap: i64,
    orig_cap: i64,
    cost: f64,
}

/// Successive shortest paths with Johnson potentials.
#[derive(Debug, Clone)]
struct MinCostFlow {
    edges: Vec<FlowEdge>,
    adj: Vec<Vec<usize>>,
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl MinCostFlow {
    fn new(n: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(FlowEdge {
            to,
            cap,
            orig_cap: cap,
            cost,
        });
        self.adj[to].push(self.edges.len());
        self.edges.push(FlowEdge {
            to: from,
            cap: 0,
            orig_cap: 0,
            cost: -cost,
        });
    }

    fn run(&mut self, s: usize, t: usize, want: i64) -> (i64, f64) {
        let n = self.adj.len();
        // all initial costs are nonnegative, so zero potentials are valid
        let mut pot = vec![0.0; n];
        let mut flow = 0;
        let mut cost = 0.0;
        while flow < want {
            let mut dist = vec![f64::INFINITY; n];
            let mut prev: Vec<Option<usize>> = vec![None; n];
            dist[s] = 0.0;
            let mut heap = BinaryHeap::new();
            heap.push(Item(0.0, s));
            while let Some(Item(d, u)) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &e in &self.adj[u] {
                    let edge = &self.edges[e];
                    if edge.cap <= 0 {
                        continue;
                    }
                    // reduced costs can dip below zero by rounding
                    let rc = (edge.cost + pot[u] - pot[edge.to]).max(0.0);
                    let nd = d + rc;
                    if nd < dist[edge.to] {
                        dist[edge.to] = nd;
                        prev[edge.to] = Some(e);
                        heap.push(Item(nd, edge.to));
                    }
                }
            }
            if !dist[t].is_finite() {
                break;
            }
            for v in 0..n {
                if dist[v].is_finite() {
                    pot[v] += dist[v];
                }
            }
            let mut push = want - flow;
            let mut v = t;
            while let Some(e) = prev[v] {
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = t;
            while let Some(e) = prev[v] {
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                cost += push as f64 * self.edges[e].cost;
                v = self.edges[e ^ 1].to;
            }
            flow += push;
        }
        (flow, cost)
    }
}
