use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::TcvrpInstance;
use crate::FEAS_TOL;

/// Load, time and distance of one depot-anchored route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteStats {
    pub load: u64,
    pub time_min: f64,
    pub dist_mi: f64,
}

/// Routes are node sequences `[0, .., 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub routes: Vec<Vec<usize>>,
    pub k: usize,
    pub vmt_mi: f64,
    pub vht_min: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub route_stats: Vec<RouteStats>,
}

impl Solution {
    /// Builds a solution and its totals from routes, recomputing every value
    /// from the instance matrices.
    pub fn from_routes(inst: &TcvrpInstance, routes: Vec<Vec<usize>>) -> Result<Self> {
        let mut stats = Vec::with_capacity(routes.len());
        for (r, route) in routes.iter().enumerate() {
            stats.push(route_stats(inst, r, route)?);
        }
        Ok(Self {
            k: routes.len(),
            vmt_mi: stats.iter().map(|s| s.dist_mi).sum(),
            vht_min: stats.iter().map(|s| s.time_min).sum(),
            routes,
            route_stats: stats,
        })
    }

    /// Builds from customer-only sequences; the depot is added at both ends.
    pub fn from_customer_routes<I>(inst: &TcvrpInstance, routes: I) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: AsRef<[usize]>,
    {
        let full = routes
            .into_iter()
            .filter(|r| !r.as_ref().is_empty())
            .map(|r| {
                let mut v = Vec::with_capacity(r.as_ref().len() + 2);
                v.push(0);
                v.extend_from_slice(r.as_ref());
                v.push(0);
                v
            })
            .collect();
        Self::from_routes(inst, full)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Successor pairs `(i, j)` used by the routes.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        self.routes
            .iter()
            .flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
            .collect()
    }
}

pub(crate) fn route_stats(inst: &TcvrpInstance, r: usize, route: &[usize]) -> Result<RouteStats> {
    let mut s = RouteStats {
        load: 0,
        time_min: 0.0,
        dist_mi: 0.0,
    };
    for &v in route {
        if v > inst.n() {
            return Err(Error::UnknownNode { route: r, node: v });
        }
        if v != 0 {
            s.load += inst.demand(v) as u64;
            s.time_min += inst.service(v);
        }
    }
    for w in route.windows(2) {
        s.time_min += inst.time(w[0], w[1]);
        s.dist_mi += inst.dist(w[0], w[1]);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Routing,
    Capacity,
    Time,
    Distance,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Routing => "routing",
            Family::Capacity => "capacity",
            Family::Time => "time",
            Family::Distance => "distance",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub family: Family,
    pub route: Option<usize>,
    pub node: Option<usize>,
    /// Amount by which the bound is exceeded (0 for structural violations).
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
    pub routes: Vec<RouteStats>,
}

impl ValidationReport {
    pub fn flagged(&self, family: Family) -> bool {
        self.violations.iter().any(|v| v.family == family)
    }
}

/// Recomputes every route from the instance and checks each constraint
/// family. Stored totals in `sol` are ignored.
pub fn validate(inst: &TcvrpInstance, sol: &Solution) -> Result<ValidationReport> {
    let mut violations = Vec::new();
    let mut seen = vec![0usize; inst.n() + 1];
    let mut stats = Vec::with_capacity(sol.routes.len());
    for (r, route) in sol.routes.iter().enumerate() {
        let s = route_stats(inst, r, route)?;
        stats.push(s);
        let anchored = route.len() >= 2 && route[0] == 0 && route[route.len() - 1] == 0;
        if !anchored {
            violations.push(structural(r, None, "route must start and end at the depot"));
        }
        let interior = if route.len() >= 2 { &route[1..route.len() - 1] } else { &[][..] };
        if interior.is_empty() {
            violations.push(structural(r, None, "route visits no customer"));
        }
        for &v in interior {
            if v == 0 {
                violations.push(structural(r, Some(0), "depot visited mid-route"));
            } else {
                seen[v] += 1;
            }
        }
        if s.load > inst.capacity() as u64 {
            violations.push(Violation {
                family: Family::Capacity,
                route: Some(r),
                node: None,
                margin: (s.load - inst.capacity() as u64) as f64,
                detail: format!("load {} > Q = {}", s.load, inst.capacity()),
            });
        }
        if s.time_min > inst.max_time() + FEAS_TOL {
            violations.push(Violation {
                family: Family::Time,
                route: Some(r),
                node: None,
                margin: s.time_min - inst.max_time(),
                detail: format!("time {:.4} min > Tbar = {}", s.time_min, inst.max_time()),
            });
        }
        if let Some(dbar) = inst.max_dist() {
            if s.dist_mi > dbar + FEAS_TOL {
                violations.push(Violation {
                    family: Family::Distance,
                    route: Some(r),
                    node: None,
                    margin: s.dist_mi - dbar,
                    detail: format!("distance {:.4} mi > Dbar = {dbar}", s.dist_mi),
                });
            }
        }
    }
    for (v, &count) in seen.iter().enumerate().skip(1) {
        if count != 1 {
            violations.push(Violation {
                family: Family::Routing,
                route: None,
                node: Some(v),
                margin: 0.0,
                detail: format!("node {v} visited {count} times"),
            });
        }
    }
    Ok(ValidationReport {
        feasible: violations.is_empty(),
        violations,
        routes: stats,
    })
}

fn structural(route: usize, node: Option<usize>, msg: &str) -> Violation {
    Violation {
        family: Family::Routing,
        route: Some(route),
        node,
        margin: 0.0,
        detail: msg.to_string(),
    }
}

/// Decodes arc values `x[i][j]` (threshold 0.5) into routes by following
/// successors out of the depot in increasing order of the first customer.
pub fn solution_from_arcs(inst: &TcvrpInstance, x: &[Vec<f64>]) -> Result<Solution> {
    let size = inst.n() + 1;
    if x.len() != size || x.iter().any(|r| r.len() != size) {
        return Err(Error::MalformedArcs(format!("expected a {size}x{size} matrix")));
    }
    let mut succ = vec![None; size];
    let mut starts = Vec::new();
    for (i, row) in x.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v <= 0.5 || i == j {
                continue;
            }
            if i == 0 {
                starts.push(j);
            } else if succ[i].replace(j).is_some() {
                return Err(Error::MalformedArcs(format!("node {i} has two successors")));
            }
        }
    }
    let mut visited = vec![false; size];
    let mut routes = Vec::with_capacity(starts.len());
    for &s in &starts {
        let mut route = vec![0];
        let mut cur = s;
        while cur != 0 {
            if visited[cur] {
                return Err(Error::MalformedArcs(format!("node {cur} entered twice")));
            }
            visited[cur] = true;
            route.push(cur);
            cur = succ[cur]
                .ok_or_else(|| Error::MalformedArcs(format!("node {cur} has no successor")))?;
        }
        route.push(0);
        routes.push(route);
    }
    if let Some(first) = (1..size).find(|&v| !visited[v]) {
        let mut cycle = vec![first];
        let mut cur = succ[first];
        while let Some(c) = cur {
            if c == first || c == 0 || cycle.contains(&c) {
                break;
            }
            cycle.push(c);
            cur = succ[c];
        }
        return Err(Error::Subtour(cycle));
    }
    Solution::from_routes(inst, routes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, q: u32, tbar: f64) -> TcvrpInstance {
        let size = n + 1;
        let m: Vec<Vec<f64>> = (0..size)
            .map(|i| (0..size).map(|j| (i as f64 - j as f64).abs()).collect())
            .collect();
        let mut demand = vec![1; size];
        demand[0] = 0;
        let mut service = vec![1.0; size];
        service[0] = 0.0;
        TcvrpInstance::new(demand, service, m.clone(), m, q, tbar, None).unwrap()
    }

    #[test]
    fn single_route_feasible() {
        let inst = line(4, 10, 100.0);
        let sol = Solution::from_routes(&inst, vec![vec![0, 1, 2, 3, 4, 0]]).unwrap();
        let rep = validate(&inst, &sol).unwrap();
        assert!(rep.feasible, "{:?}", rep.violations);
        assert_eq!(sol.vmt_mi, 8.0);
        assert_eq!(sol.vht_min, 12.0);
        assert_eq!(sol.k, 1);
    }

    #[test]
    fn overload_flags_capacity() {
        let inst = line(4, 3, 100.0);
        let sol = Solution::from_routes(&inst, vec![vec![0, 1, 2, 3, 4, 0]]).unwrap();
        let rep = validate(&inst, &sol).unwrap();
        assert!(!rep.feasible);
        assert!(rep.flagged(Family::Capacity));
        assert!(!rep.flagged(Family::Time));
        assert_eq!(rep.violations[0].margin, 1.0);
    }

    #[test]
    fn stored_totals_are_ignored() {
        let inst = line(2, 3, 100.0);
        let mut sol = Solution::from_routes(&inst, vec![vec![0, 1, 2, 0]]).unwrap();
        sol.vmt_mi = 0.0;
        sol.k = 7;
        assert!(validate(&inst, &sol).unwrap().feasible);
    }

    #[test]
    fn coverage_errors() {
        let inst = line(3, 10, 100.0);
        let sol = Solution::from_routes(&inst, vec![vec![0, 1, 1, 0], vec![0, 2, 0]]).unwrap();
        let rep = validate(&inst, &sol).unwrap();
        assert_eq!(
            rep.violations.iter().filter(|v| v.family == Family::Routing).count(),
            2
        );
    }

    #[test]
    fn unknown_node_is_structural_error() {
        let inst = line(2, 10, 100.0);
        let sol = Solution {
            routes: vec![vec![0, 1, 9, 0]],
            k: 1,
            vmt_mi: 0.0,
            vht_min: 0.0,
            route_stats: vec![],
        };
        assert!(matches!(
            validate(&inst, &sol),
            Err(Error::UnknownNode { route: 0, node: 9 })
        ));
    }

    #[test]
    fn arcs_decode_two_loops() {
        let inst = line(3, 10, 100.0);
        let mut x = vec![vec![0.0; 4]; 4];
        x[0][1] = 1.0;
        x[1][2] = 1.0;
        x[2][0] = 1.0;
        x[0][3] = 1.0;
        x[3][0] = 1.0;
        let sol = solution_from_arcs(&inst, &x).unwrap();
        assert_eq!(sol.k, 2);
        assert_eq!(sol.routes, vec![vec![0, 1, 2, 0], vec![0, 3, 0]]);
    }

    #[test]
    fn arcs_detect_subtour() {
        let inst = line(3, 10, 100.0);
        let mut x = vec![vec![0.0; 4]; 4];
        x[0][1] = 1.0;
        x[1][0] = 1.0;
        x[2][3] = 1.0;
        x[3][2] = 1.0;
        match solution_from_arcs(&inst, &x) {
            Err(Error::Subtour(c)) => assert_eq!(c, vec![2, 3]),
            other => panic!("expected subtour, got {other:?}"),
        }
    }

    #[test]
    fn solution_json_schema() {
        let inst = line(2, 10, 100.0);
        let sol = Solution::from_routes(&inst, vec![vec![0, 1, 2, 0]]).unwrap();
        let s = sol.to_json_string().unwrap();
        assert!(s.starts_with("{\"routes\":[[0,1,2,0]],\"k\":1,\"vmt_mi\":4.0,\"vht_min\":6.0"));
        assert_eq!(Solution::from_json_str(&s).unwrap(), sol);
        let bare = Solution::from_json_str(r#"{"routes":[[0,1,2,0]],"k":1,"vmt_mi":4,"vht_min":6}"#)
            .unwrap();
        assert!(bare.route_stats.is_empty());
    }
}
