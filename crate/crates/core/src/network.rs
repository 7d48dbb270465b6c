//! Directed road networks and time-optimal shortest-path matrices.
//!
//! Units are fixed crate-wide: arc lengths in miles, speeds in mph, times in
//! minutes. Paths minimize travel time; the reported distance is the length
//! of the time-optimal path.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VertexId = u64;
pub type ArcId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: VertexId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub id: ArcId,
    pub from: VertexId,
    pub to: VertexId,
    pub length_mi: f64,
    pub speed_mph: f64,
}

impl Arc {
    /// Traversal time in minutes.
    pub fn time_min(&self) -> f64 {
        self.length_mi / self.speed_mph * 60.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkFile {
    vertices: Vec<Vertex>,
    arcs: Vec<Arc>,
}

/// Immutable directed graph. Parallel arcs are allowed, self-loops are not.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    vertices: Vec<Vertex>,
    arcs: Vec<Arc>,
    vertex_index: HashMap<VertexId, usize>,
    arc_index: HashMap<ArcId, usize>,
    // outgoing arc positions per vertex position, sorted by arc id
    out: Vec<Vec<usize>>,
}

impl PartialEq for RoadNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.arcs == other.arcs
    }
}

impl RoadNetwork {
    pub fn new(vertices: Vec<Vertex>, arcs: Vec<Arc>) -> Result<Self> {
        let mut vertex_index = HashMap::with_capacity(vertices.len());
        for (pos, v) in vertices.iter().enumerate() {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "vertex {} has non-finite coordinates",
                    v.id
                )));
            }
            if vertex_index.insert(v.id, pos).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate vertex id {}", v.id)));
            }
        }
        let mut arc_index = HashMap::with_capacity(arcs.len());
        let mut out = vec![Vec::new(); vertices.len()];
        for (pos, a) in arcs.iter().enumerate() {
            if arc_index.insert(a.id, pos).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate arc id {}", a.id)));
            }
            let tail = *vertex_index.get(&a.from).ok_or_else(|| {
                Error::InvalidNetwork(format!("arc {} tail {} is not a vertex", a.id, a.from))
            })?;
            if !vertex_index.contains_key(&a.to) {
                return Err(Error::InvalidNetwork(format!(
                    "arc {} head {} is not a vertex",
                    a.id, a.to
                )));
            }
            if a.from == a.to {
                return Err(Error::InvalidNetwork(format!("arc {} is a self-loop", a.id)));
            }
            if !(a.length_mi > 0.0 && a.length_mi.is_finite()) {
                return Err(Error::InvalidNetwork(format!(
                    "arc {} length must be positive",
                    a.id
                )));
            }
            if !(a.speed_mph > 0.0 && a.speed_mph.is_finite()) {
                return Err(Error::InvalidNetwork(format!(
                    "arc {} speed must be positive",
                    a.id
                )));
            }
            out[tail].push(pos);
        }
        for list in &mut out {
            list.sort_by_key(|&p| arcs[p].id);
        }
        Ok(Self {
            vertices,
            arcs,
            vertex_index,
            arc_index,
            out,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(s)?;
        Self::new(file.vertices, file.arcs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = NetworkFile {
            vertices: self.vertices.clone(),
            arcs: self.arcs.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn vertex(&self, id: VertexId) -> Option<&Vertex> {
        self.vertex_index.get(&id).map(|&p| &self.vertices[p])
    }

    pub fn arc(&self, id: ArcId) -> Option<&Arc> {
        self.arc_index.get(&id).map(|&p| &self.arcs[p])
    }

    /// Planar midpoint of an arc's straight-line segment.
    pub fn midpoint(&self, arc: &Arc) -> (f64, f64) {
        let a = &self.vertices[self.vertex_index[&arc.from]];
        let b = &self.vertices[self.vertex_index[&arc.to]];
        ((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)
    }

    /// Single-source Dijkstra on travel time.
    pub fn shortest_path_tree(&self, source: VertexId) -> Result<ShortestPathTree> {
        let src = *self
            .vertex_index
            .get(&source)
            .ok_or_else(|| Error::InvalidInput(format!("unknown vertex {source}")))?;
        let n = self.vertices.len();
        let mut label = vec![Label::UNREACHED; n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        let mut done = vec![false; n];
        label[src] = Label {
            time: 0.0,
            dist: 0.0,
            last_arc: None,
        };
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry {
            label: label[src],
            vertex: src,
        });
        while let Some(HeapEntry { label: l, vertex: u }) = heap.pop() {
            if done[u] || l != label[u] {
                continue;
            }
            done[u] = true;
            for &ap in &self.out[u] {
                let arc = &self.arcs[ap];
                let v = self.vertex_index[&arc.to];
                if done[v] {
                    continue;
                }
                let cand = Label {
                    time: l.time + arc.time_min(),
                    dist: l.dist + arc.length_mi,
                    last_arc: Some(arc.id),
                };
                if cand.cmp_key(&label[v]) == Ordering::Less {
                    label[v] = cand;
                    pred[v] = Some(ap);
                    heap.push(HeapEntry {
                        label: cand,
                        vertex: v,
                    });
                }
            }
        }
        Ok(ShortestPathTree {
            source,
            time: label.iter().map(|l| l.time).collect(),
            dist: label.iter().map(|l| l.dist).collect(),
            pred,
        })
    }

    /// Time and distance matrices between every source and every target.
    ///
    /// Rows follow `sources`, columns follow `targets`. Entries where a
    /// source equals a target are zero.
    pub fn shortest_paths(
        &self,
        sources: &[VertexId],
        targets: &[VertexId],
    ) -> Result<TravelMatrices> {
        if sources.is_empty() || targets.is_empty() {
            return Err(Error::EmptyEndpoints);
        }
        for id in sources.iter().chain(targets) {
            if !self.vertex_index.contains_key(id) {
                return Err(Error::InvalidInput(format!("unknown vertex {id}")));
            }
        }
        let target_pos: Vec<usize> = targets.iter().map(|t| self.vertex_index[t]).collect();
        let rows: Vec<(Vec<f64>, Vec<f64>)> = sources
            .par_iter()
            .map(|&s| {
                let tree = self.shortest_path_tree(s)?;
                let mut trow = Vec::with_capacity(targets.len());
                let mut drow = Vec::with_capacity(targets.len());
                for (k, &tp) in target_pos.iter().enumerate() {
                    if !tree.time[tp].is_finite() {
                        return Err(Error::Unreachable {
                            from: s,
                            to: targets[k],
                        });
                    }
                    trow.push(tree.time[tp]);
                    drow.push(tree.dist[tp]);
                }
                Ok((trow, drow))
            })
            .collect::<Result<_>>()?;
        let (time, dist) = rows.into_iter().unzip();
        Ok(TravelMatrices {
            sources: sources.to_vec(),
            targets: targets.to_vec(),
            time,
            dist,
        })
    }

    /// Square matrices between arc midpoints.
    ///
    /// Travel from the midpoint of arc `a` to the midpoint of arc `b` runs
    /// the second half of `a`, a time-shortest path from `a`'s head to `b`'s
    /// tail, and the first half of `b`. Entry `[i][i]` and entries between
    /// repeated arcs are zero.
    pub fn midpoint_matrices(&self, arcs: &[ArcId]) -> Result<SquareMatrices> {
        if arcs.is_empty() {
            return Err(Error::EmptyEndpoints);
        }
        let resolved: Vec<Arc> = arcs
            .iter()
            .map(|id| {
                self.arc(*id)
                    .copied()
                    .ok_or_else(|| Error::InvalidInput(format!("unknown arc {id}")))
            })
            .collect::<Result<_>>()?;
        let mut heads: Vec<VertexId> = resolved.iter().map(|a| a.to).collect();
        heads.sort_unstable();
        heads.dedup();
        let mut tails: Vec<VertexId> = resolved.iter().map(|a| a.from).collect();
        tails.sort_unstable();
        tails.dedup();
        let inner = self.shortest_paths(&heads, &tails)?;
        let head_row: HashMap<VertexId, usize> =
            heads.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let tail_col: HashMap<VertexId, usize> =
            tails.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let n = resolved.len();
        let mut time = vec![vec![0.0; n]; n];
        let mut dist = vec![vec![0.0; n]; n];
        for (i, a) in resolved.iter().enumerate() {
            let r = head_row[&a.to];
            for (j, b) in resolved.iter().enumerate() {
                if a.id == b.id {
                    continue;
                }
                let c = tail_col[&b.from];
                time[i][j] = a.time_min() / 2.0 + inner.time[r][c] + b.time_min() / 2.0;
                dist[i][j] = a.length_mi / 2.0 + inner.dist[r][c] + b.length_mi / 2.0;
            }
        }
        Ok(SquareMatrices { time, dist })
    }
}

/// Rectangular shortest-path matrices between vertex sets.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelMatrices {
    pub sources: Vec<VertexId>,
    pub targets: Vec<VertexId>,
    /// Minutes.
    pub time: Vec<Vec<f64>>,
    /// Miles along the time-optimal path.
    pub dist: Vec<Vec<f64>>,
}

/// Square time/distance matrices over an ordered node list.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrices {
    pub time: Vec<Vec<f64>>,
    pub dist: Vec<Vec<f64>>,
}

impl SquareMatrices {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ShortestPathTree {
    pub source: VertexId,
    time: Vec<f64>,
    dist: Vec<f64>,
    pred: Vec<Option<usize>>,
}

impl ShortestPathTree {
    pub fn time_to(&self, net: &RoadNetwork, v: VertexId) -> Option<f64> {
        let t = self.time[*net.vertex_index.get(&v)?];
        t.is_finite().then_some(t)
    }

    pub fn dist_to(&self, net: &RoadNetwork, v: VertexId) -> Option<f64> {
        let p = *net.vertex_index.get(&v)?;
        self.time[p].is_finite().then_some(self.dist[p])
    }

    /// Arc ids along the time-optimal path from the source to `v`.
    pub fn path_to(&self, net: &RoadNetwork, v: VertexId) -> Option<Vec<ArcId>> {
        let mut p = *net.vertex_index.get(&v)?;
        if !self.time[p].is_finite() {
            return None;
        }
        let mut path = Vec::new();
        while let Some(ap) = self.pred[p] {
            let arc = &net.arcs[ap];
            path.push(arc.id);
            p = net.vertex_index[&arc.from];
        }
        path.reverse();
        Some(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Label {
    time: f64,
    dist: f64,
    last_arc: Option<ArcId>,
}

impl Label {
    const UNREACHED: Label = Label {
        time: f64::INFINITY,
        dist: f64::INFINITY,
        last_arc: None,
    };

    // time, then distance, then the id of the arc entering the vertex
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.dist.total_cmp(&other.dist))
            .then_with(|| match (self.last_arc, other.last_arc) {
                (Some(a), Some(b)) => a.cmp(&b),
                (None, Some(_)) => Ordering::Less,
                (Some(_), None) => Ordering::Greater,
                (None, None) => Ordering::Equal,
            })
    }
}

#[derive(Debug, PartialEq)]
struct HeapEntry {
    label: Label,
    vertex: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .label
            .cmp_key(&self.label)
            .then(other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
