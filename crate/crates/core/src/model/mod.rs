//! Arc-flow MIP for the time-constrained capacitated routing problem.
//!
//! Variables, for every ordered pair `i != j` of `V = {0} ∪ V'`:
//! `x_i_j` binary arc use, `y_i_j` packages delivered once `i` is left,
//! `z_i_j` elapsed time on arrival at `j` from `i`, and (range-limited
//! vehicles only) `zp_i_j` elapsed distance on arrival. `k` counts vehicles.
//!
//! Constraint families:
//! - routing: unit in/out degree on customers, depot out/in degree equal to `k`
//! - capacity: `y <= Q x` on every arc, load balance at customers
//! - time: flow balance, arrival upper/lower links, return cap, depot start
//! - distance: the same five blocks on `zp` with `D` and `Dbar`

mod mps;
mod solution;

pub use mps::{export_mps, parse_mps, write_mps};
pub use solution::{
    solution_from_arcs, validate, Family, RouteStats, Solution, ValidationReport, Violation,
};

use serde::Serialize;

use crate::error::Result;
use crate::instance::TcvrpInstance;
use crate::FEAS_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub name: String,
    pub family: Family,
    /// `(variable index, coefficient)`, sorted by index, no zeros.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// Positive amount by which `values` violate the row, or 0.
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MipModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Objective coefficient per variable (minimized).
    pub objective: Vec<f64>,
}

/// Index layout of the variables of a [`MipModel`] built from an instance
/// with `n` customers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub n: usize,
    pub with_distance: bool,
}

impl VarLayout {
    pub fn arcs(&self) -> usize {
        self.n * (self.n + 1)
    }

    fn arc(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j);
        i * self.n + if j < i { j } else { j - 1 }
    }

    pub fn x(&self, i: usize, j: usize) -> usize {
        self.arc(i, j)
    }

    pub fn y(&self, i: usize, j: usize) -> usize {
        self.arcs() + self.arc(i, j)
    }

    pub fn z(&self, i: usize, j: usize) -> usize {
        2 * self.arcs() + self.arc(i, j)
    }

    pub fn zp(&self, i: usize, j: usize) -> Option<usize> {
        self.with_distance
            .then(|| 3 * self.arcs() + self.arc(i, j))
    }

    pub fn k(&self) -> usize {
        self.arcs() * if self.with_distance { 4 } else { 3 }
    }

    pub fn num_vars(&self) -> usize {
        self.k() + 1
    }

    /// Closed-form row count per family: routing, capacity, time, distance.
    pub fn family_rows(&self) -> [usize; 4] {
        let n = self.n;
        let flow = n + n * n + n * n + n + n;
        [
            2 * n + 2,
            n * (n + 1) + n,
            flow,
            if self.with_distance { flow } else { 0 },
        ]
    }
}

fn row(name: String, family: Family, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Constraint {
    let mut terms: Vec<(usize, f64)> = terms;
    terms.sort_by_key(|t| t.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (v, c) in terms {
        match merged.last_mut() {
            Some(last) if last.0 == v => last.1 += c,
            _ => merged.push((v, c)),
        }
    }
    merged.retain(|t| t.1 != 0.0);
    Constraint {
        name,
        family,
        terms: merged,
        sense,
        rhs,
    }
}

impl MipModel {
    pub fn layout_for(inst: &TcvrpInstance) -> VarLayout {
        VarLayout {
            n: inst.n(),
            with_distance: inst.max_dist().is_some(),
        }
    }

    pub fn build(inst: &TcvrpInstance) -> Self {
        let n = inst.n();
        let lay = Self::layout_for(inst);
        let size = n + 1;
        let pairs: Vec<(usize, usize)> = (0..size)
            .flat_map(|i| (0..size).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .collect();

        let mut variables = Vec::with_capacity(lay.num_vars());
        let prefixes: &[&str] = if lay.with_distance {
            &["x", "y", "z", "zp"]
        } else {
            &["x", "y", "z"]
        };
        for (block, p) in prefixes.iter().enumerate() {
            for &(i, j) in &pairs {
                variables.push(Variable {
                    name: format!("{p}_{i}_{j}"),
                    kind: if block == 0 {
                        VarKind::Binary
                    } else {
                        VarKind::Continuous
                    },
                    lower: 0.0,
                    upper: if block == 0 { 1.0 } else { f64::INFINITY },
                });
            }
        }
        variables.push(Variable {
            name: "k".into(),
            kind: VarKind::Integer,
            lower: 0.0,
            upper: f64::INFINITY,
        });
        debug_assert_eq!(variables.len(), lay.num_vars());

        let mut objective = vec![0.0; lay.num_vars()];
        for &(i, j) in &pairs {
            objective[lay.x(i, j)] = inst.dist(i, j);
        }

        let customers = 1..size;
        let nodes = 0..size;
        let mut cons = Vec::new();

        // routing
        for j in customers.clone() {
            let terms = nodes.clone().filter(|&i| i != j).map(|i| (lay.x(i, j), 1.0)).collect();
            cons.push(row(format!("in_{j}"), Family::Routing, terms, Sense::Eq, 1.0));
        }
        for i in customers.clone() {
            let terms = nodes.clone().filter(|&j| j != i).map(|j| (lay.x(i, j), 1.0)).collect();
            cons.push(row(format!("out_{i}"), Family::Routing, terms, Sense::Eq, 1.0));
        }
        let mut t: Vec<(usize, f64)> = customers.clone().map(|i| (lay.x(0, i), 1.0)).collect();
        t.push((lay.k(), -1.0));
        cons.push(row("depot_out".into(), Family::Routing, t, Sense::Eq, 0.0));
        let mut t: Vec<(usize, f64)> = customers.clone().map(|i| (lay.x(i, 0), 1.0)).collect();
        t.push((lay.k(), -1.0));
        cons.push(row("depot_in".into(), Family::Routing, t, Sense::Eq, 0.0));

        // capacity
        let q = inst.capacity() as f64;
        for &(i, j) in &pairs {
            cons.push(row(
                format!("cap_{i}_{j}"),
                Family::Capacity,
                vec![(lay.y(i, j), 1.0), (lay.x(i, j), -q)],
                Sense::Le,
                0.0,
            ));
        }
        for i in customers.clone() {
            let mut terms = Vec::with_capacity(2 * n);
            for j in nodes.clone().filter(|&j| j != i) {
                terms.push((lay.y(i, j), 1.0));
                terms.push((lay.y(j, i), -1.0));
            }
            cons.push(row(
                format!("load_{i}"),
                Family::Capacity,
                terms,
                Sense::Eq,
                inst.demand(i) as f64,
            ));
        }

        // time and distance flow families share one shape
        let time = FlowFamily {
            family: Family::Time,
            prefix: "t",
            var: &|i, j| lay.z(i, j),
            arc: &|i, j| inst.time(i, j),
            node: &|i| inst.service(i),
            bound: inst.max_time(),
        };
        time.emit(size, &mut cons);
        if let Some(dbar) = inst.max_dist() {
            let dist = FlowFamily {
                family: Family::Distance,
                prefix: "d",
                var: &|i, j| lay.zp(i, j).expect("distance layout"),
                arc: &|i, j| inst.dist(i, j),
                node: &|_| 0.0,
                bound: dbar,
            };
            dist.emit(size, &mut cons);
        }

        Self {
            name: "TCVRP".into(),
            variables,
            constraints: cons,
            objective,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn rows_in(&self, family: Family) -> usize {
        self.constraints.iter().filter(|c| c.family == family).count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, v)| c * v).sum()
    }

    /// Rows violated by more than the absolute tolerance, and variables
    /// outside their bounds or integrality.
    pub fn violated_rows(&self, values: &[f64]) -> Vec<&Constraint> {
        self.constraints
            .iter()
            .filter(|c| c.violation(values) > FEAS_TOL)
            .collect()
    }

    pub fn is_feasible(&self, values: &[f64]) -> bool {
        if values.len() != self.variables.len() {
            return false;
        }
        let bounds_ok = self.variables.iter().zip(values).all(|(v, &x)| {
            x >= v.lower - FEAS_TOL
                && x <= v.upper + FEAS_TOL
                && (v.kind == VarKind::Continuous || (x - x.round()).abs() <= FEAS_TOL)
        });
        bounds_ok && self.violated_rows(values).is_empty()
    }
}

struct FlowFamily<'a> {
    family: Family,
    prefix: &'static str,
    var: &'a dyn Fn(usize, usize) -> usize,
    arc: &'a dyn Fn(usize, usize) -> f64,
    node: &'a dyn Fn(usize) -> f64,
    bound: f64,
}

impl FlowFamily<'_> {
    fn emit(&self, size: usize, cons: &mut Vec<Constraint>) {
        let p = self.prefix;
        let x = |i, j| VarLayout { n: size - 1, with_distance: false }.x(i, j);
        for i in 1..size {
            let mut terms = Vec::new();
            for j in (0..size).filter(|&j| j != i) {
                terms.push(((self.var)(i, j), 1.0));
                terms.push(((self.var)(j, i), -1.0));
                terms.push((x(i, j), -((self.arc)(i, j) + (self.node)(i))));
            }
            cons.push(row(format!("{p}bal_{i}"), self.family, terms, Sense::Eq, 0.0));
        }
        for i in 0..size {
            for j in (1..size).filter(|&j| j != i) {
                cons.push(row(
                    format!("{p}ub_{i}_{j}"),
                    self.family,
                    vec![((self.var)(i, j), 1.0), (x(i, j), -(self.bound - (self.arc)(j, 0)))],
                    Sense::Le,
                    0.0,
                ));
            }
        }
        for i in 1..size {
            for j in (0..size).filter(|&j| j != i) {
                cons.push(row(
                    format!("{p}lb_{i}_{j}"),
                    self.family,
                    vec![
                        ((self.var)(i, j), 1.0),
                        (x(i, j), -((self.arc)(i, j) + (self.arc)(0, i) + (self.node)(i))),
                    ],
                    Sense::Ge,
                    0.0,
                ));
            }
        }
        for i in 1..size {
            cons.push(row(
                format!("{p}ret_{i}"),
                self.family,
                vec![((self.var)(i, 0), 1.0), (x(i, 0), -self.bound)],
                Sense::Le,
                0.0,
            ));
        }
        for i in 1..size {
            cons.push(row(
                format!("{p}start_{i}"),
                self.family,
                vec![((self.var)(0, i), 1.0), (x(0, i), -(self.arc)(0, i))],
                Sense::Eq,
                0.0,
            ));
        }
    }
}

/// The variable assignment a set of routes induces: `x` marks used arcs,
/// `y` the cumulative load after leaving each node, `z`/`zp` the elapsed
/// time/distance on arrival, `k` the number of routes.
///
/// Repeated arcs accumulate, so malformed route sets surface as degree
/// violations.
pub fn induced_values(inst: &TcvrpInstance, routes: &[Vec<usize>]) -> Vec<f64> {
    let lay = MipModel::layout_for(inst);
    let mut vals = vec![0.0; lay.num_vars()];
    for route in routes {
        let mut load = 0.0;
        let mut time = 0.0;
        let mut dist = 0.0;
        for w in route.windows(2) {
            let (i, j) = (w[0], w[1]);
            if i != 0 {
                load += inst.demand(i) as f64;
                time += inst.service(i);
            }
            time += inst.time(i, j);
            dist += inst.dist(i, j);
            if i == j {
                continue;
            }
            vals[lay.x(i, j)] += 1.0;
            vals[lay.y(i, j)] += load;
            vals[lay.z(i, j)] += time;
            if let Some(zp) = lay.zp(i, j) {
                vals[zp] += dist;
            }
        }
    }
    vals[lay.k()] = routes.len() as f64;
    vals
}

/// Serializable summary of a model's size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModelCounts {
    pub variables: usize,
    pub constraints: usize,
    pub routing: usize,
    pub capacity: usize,
    pub time: usize,
    pub distance: usize,
}

impl MipModel {
    pub fn counts(&self) -> ModelCounts {
        ModelCounts {
            variables: self.num_vars(),
            constraints: self.num_rows(),
            routing: self.rows_in(Family::Routing),
            capacity: self.rows_in(Family::Capacity),
            time: self.rows_in(Family::Time),
            distance: self.rows_in(Family::Distance),
        }
    }
}

/// Builds the model for `inst`.
pub fn build_mip(inst: &TcvrpInstance) -> Result<MipModel> {
    Ok(MipModel::build(inst))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(n: usize, dbar: Option<f64>) -> TcvrpInstance {
        let size = n + 1;
        let m: Vec<Vec<f64>> = (0..size)
            .map(|i| (0..size).map(|j| if i == j { 0.0 } else { 1.0 + (i + 2 * j) as f64 }).collect())
            .collect();
        let mut demand = vec![1; size];
        demand[0] = 0;
        let mut service = vec![2.0; size];
        service[0] = 0.0;
        TcvrpInstance::new(demand, service, m.clone(), m, 10, 600.0, dbar).unwrap()
    }

    // Index sets of each family expanded by hand for n = 2 with a range limit:
    // routing 2 + 2 + 2; capacity 6 arcs + 2 balances; time 2 + 4 + 4 + 2 + 2;
    // distance mirrors time.
    #[test]
    fn n2_counts() {
        let m = MipModel::build(&inst(2, Some(80.0)));
        assert_eq!(m.num_vars(), 25);
        assert_eq!(m.num_rows(), 42);
        let c = m.counts();
        assert_eq!((c.routing, c.capacity, c.time, c.distance), (6, 8, 14, 14));
        assert_eq!(MipModel::layout_for(&inst(2, Some(80.0))).family_rows(), [6, 8, 14, 14]);
    }

    #[test]
    fn conventional_vehicle_has_no_distance_family() {
        let m = MipModel::build(&inst(3, None));
        assert!(m.variables.iter().all(|v| !v.name.starts_with("zp_")));
        assert_eq!(m.rows_in(Family::Distance), 0);
        assert_eq!(m.num_vars(), 3 * 12 + 1);
    }

    #[test]
    fn n1_forced_solution() {
        let i = inst(1, Some(80.0));
        let m = MipModel::build(&i);
        let vals = induced_values(&i, &[vec![0, 1, 0]]);
        assert!(m.is_feasible(&vals));
        let lay = MipModel::layout_for(&i);
        assert_eq!(vals[lay.x(0, 1)], 1.0);
        assert_eq!(vals[lay.x(1, 0)], 1.0);
        assert_eq!(vals[lay.k()], 1.0);
        // no route at all violates the customer degree rows
        let empty = induced_values(&i, &[]);
        assert!(!m.is_feasible(&empty));
    }

    #[test]
    fn objective_is_distance_on_x() {
        let i = inst(2, None);
        let m = MipModel::build(&i);
        let lay = MipModel::layout_for(&i);
        for (v, c) in m.objective.iter().enumerate() {
            if v < lay.arcs() {
                assert!(*c > 0.0);
            } else {
                assert_eq!(*c, 0.0);
            }
        }
        let sol = Solution::from_routes(&i, vec![vec![0, 2, 1, 0]]).unwrap();
        let vals = induced_values(&i, &sol.routes);
        assert!((m.objective_value(&vals) - sol.vmt_mi).abs() < 1e-9);
    }
}
