//! Super-locations: customers collapsed onto the nearest arc midpoint.
//!
//! Each super-location carries its package count and the closed tour that
//! serves its members from the midpoint; that tour's time enters the
//! service time `S_i` and its length is charged on every arc leaving `i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assign::{Customer, CustomerId, Point};
use crate::error::{Error, Result};
use crate::instance::TcvrpInstance;
use crate::network::{ArcId, RoadNetwork, SquareMatrices};
use crate::tsp::{self, TspInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperLocation {
    pub arc: ArcId,
    pub anchor: Point,
    pub members: Vec<Customer>,
    /// Total packages, `N_i`.
    pub packages: u32,
    pub intra_time_min: f64,
    pub intra_dist_mi: f64,
    /// Whether the intra tour was solved to optimality.
    pub intra_exact: bool,
}

impl SuperLocation {
    pub fn member_ids(&self) -> Vec<CustomerId> {
        self.members.iter().map(|c| c.id).collect()
    }
}

/// Uniform bucket grid over arc midpoints for nearest-midpoint queries
/// under the Manhattan metric.
struct MidpointGrid {
    points: Vec<(Point, ArcId)>,
    min: Point,
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<usize>>,
}

impl MidpointGrid {
    fn new(net: &RoadNetwork) -> Self {
        let points: Vec<(Point, ArcId)> = net
            .arcs()
            .iter()
            .map(|a| {
                let (x, y) = net.midpoint(a);
                (Point::new(x, y), a.id)
            })
            .collect();
        let (mut lo, mut hi) = (Point::new(f64::MAX, f64::MAX), Point::new(f64::MIN, f64::MIN));
        for (p, _) in &points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        let w = (hi.x - lo.x).max(1e-9);
        let h = (hi.y - lo.y).max(1e-9);
        let target = (points.len() as f64 / 2.0).max(1.0);
        let cell = ((w * h) / target).sqrt().max(w.max(h) / 1024.0);
        let cols = (w / cell).floor() as usize + 1;
        let rows = (h / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); cols * rows];
        for (k, (p, _)) in points.iter().enumerate() {
            let (c, r) = Self::cell_of(lo, cell, cols, rows, p);
            buckets[r * cols + c].push(k);
        }
        Self {
            points,
            min: lo,
            cell,
            cols,
            rows,
            buckets,
        }
    }

    fn cell_of(min: Point, cell: f64, cols: usize, rows: usize, p: &Point) -> (usize, usize) {
        let c = ((p.x - min.x) / cell).floor().clamp(0.0, (cols - 1) as f64) as usize;
        let r = ((p.y - min.y) / cell).floor().clamp(0.0, (rows - 1) as f64) as usize;
        (c, r)
    }

    fn nearest(&self, q: &Point) -> usize {
        let (qc, qr) = Self::cell_of(self.min, self.cell, self.cols, self.rows, q);
        let mut best: Option<(f64, ArcId, usize)> = None;
        let max_ring = self.cols.max(self.rows);
        for ring in 0..=max_ring {
            if let Some((d, _, _)) = best {
                if ring >= 1 && (ring as f64 - 1.0) * self.cell > d {
                    break;
                }
            }
            let r0 = qr as isize - ring as isize;
            let r1 = qr as isize + ring as isize;
            let c0 = qc as isize - ring as isize;
            let c1 = qc as isize + ring as isize;
            for r in r0..=r1 {
                if r < 0 || r >= self.rows as isize {
                    continue;
                }
                for c in c0..=c1 {
                    if c < 0 || c >= self.cols as isize {
                        continue;
                    }
                    if r != r0 && r != r1 && c != c0 && c != c1 {
                        continue;
                    }
                    for &k in &self.buckets[r as usize * self.cols + c as usize] {
                        let (p, id) = self.points[k];
                        let d = q.manhattan(&p);
                        let better = match best {
                            None => true,
                            Some((bd, bid, _)) => d < bd || (d == bd && id < bid),
                        };
                        if better {
                            best = Some((d, id, k));
                        }
                    }
                }
            }
        }
        best.expect("network has arcs").2
    }
}

/// Arc whose midpoint is nearest (Manhattan) to `p`; ties go to the smaller arc id.
pub fn nearest_arc(net: &RoadNetwork, p: &Point) -> Result<ArcId> {
    if net.arcs().is_empty() {
        return Err(Error::InvalidNetwork("network has no arcs".into()));
    }
    let grid = MidpointGrid::new(net);
    Ok(grid.points[grid.nearest(p)].1)
}

/// Attaches every customer to its nearest arc midpoint and returns one
/// super-location per occupied arc, ordered by arc id. Intra tours are not
/// computed yet.
pub fn cluster_customers(customers: &[Customer], net: &RoadNetwork) -> Result<Vec<SuperLocation>> {
    if net.arcs().is_empty() {
        return Err(Error::InvalidNetwork("network has no arcs".into()));
    }
    let grid = MidpointGrid::new(net);
    let mut groups: std::collections::BTreeMap<ArcId, (Point, Vec<Customer>)> = Default::default();
    for c in customers {
        let k = grid.nearest(&c.point());
        let (p, id) = grid.points[k];
        groups.entry(id).or_insert_with(|| (p, Vec::new())).1.push(*c);
    }
    Ok(groups
        .into_iter()
        .map(|(arc, (anchor, members))| SuperLocation {
            arc,
            anchor,
            packages: members.iter().map(|c| c.demand).sum(),
            members,
            intra_time_min: 0.0,
            intra_dist_mi: 0.0,
            intra_exact: true,
        })
        .collect())
}

/// Minimum-time closed tour from the anchor through all members under the
/// Manhattan metric at `speed_mph`. Returns `(minutes, miles, exact)`.
pub fn intra_tour(sl: &SuperLocation, speed_mph: f64, seed: u64) -> (f64, f64, bool) {
    let mut pts = Vec::with_capacity(sl.members.len() + 1);
    pts.push(sl.anchor);
    pts.extend(sl.members.iter().map(|c| c.point()));
    let cost: Vec<Vec<f64>> = pts
        .iter()
        .map(|a| pts.iter().map(|b| a.manhattan(b) / speed_mph * 60.0).collect())
        .collect();
    let inst = TspInstance::new(cost).expect("manhattan costs are valid");
    let tour = tsp::solve(&inst, seed);
    let miles: f64 = tour
        .nodes
        .windows(2)
        .map(|w| pts[w[0]].manhattan(&pts[w[1]]))
        .sum();
    (tour.cost, miles, tour.exact)
}

/// Fills the intra-tour fields of every super-location.
pub fn with_intra_tours(mut sls: Vec<SuperLocation>, speed_mph: f64, seed: u64) -> Vec<SuperLocation> {
    sls.par_iter_mut().for_each(|sl| {
        let (t, d, exact) = intra_tour(sl, speed_mph, seed ^ sl.arc);
        sl.intra_time_min = t;
        sl.intra_dist_mi = d;
        sl.intra_exact = exact;
    });
    sls
}

/// Route limits and dwell time used to turn super-locations into an instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub capacity: u32,
    pub max_time_min: f64,
    /// Dwell minutes per customer, `P`.
    pub dwell_min: f64,
    pub max_dist_mi: Option<f64>,
}

impl Default for InstanceParams {
    fn default() -> Self {
        use crate::defaults::*;
        Self {
            capacity: CAPACITY,
            max_time_min: MAX_TIME_H * 60.0,
            dwell_min: DWELL_MIN,
            max_dist_mi: Some(BEV_RANGE_MI),
        }
    }
}

/// `matrices` rows/columns: node 0 is the depot, node `i` is `sls[i - 1]`.
pub fn build_instance(
    sls: &[SuperLocation],
    matrices: &SquareMatrices,
    params: &InstanceParams,
) -> Result<TcvrpInstance> {
    let size = sls.len() + 1;
    if matrices.len() != size {
        return Err(Error::InvalidInput(format!(
            "matrices cover {} nodes, expected depot + {} super-locations",
            matrices.len(),
            sls.len()
        )));
    }
    if params.dwell_min < 0.0 {
        return Err(Error::InvalidInput("dwell time must be nonnegative".into()));
    }
    let mut demand = vec![0u32; size];
    let mut service = vec![0.0; size];
    let mut dist = matrices.dist.clone();
    for (k, sl) in sls.iter().enumerate() {
        let i = k + 1;
        demand[i] = sl.packages;
        service[i] = sl.intra_time_min + sl.packages as f64 * params.dwell_min;
        for (j, d) in dist[i].iter_mut().enumerate() {
            if j != i {
                *d += sl.intra_dist_mi;
            }
        }
    }
    TcvrpInstance::new(
        demand,
        service,
        matrices.time.clone(),
        dist,
        params.capacity,
        params.max_time_min,
        params.max_dist_mi,
    )
}
