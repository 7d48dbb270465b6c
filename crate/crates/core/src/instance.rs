//! The depot-level routing instance shared by every solver.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Depot is node 0, super-locations are nodes `1..=n`.
///
/// `demand` and `service_min` are indexed by node and carry zero for the depot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcvrpInstance {
    #[serde(default)]
    depot: usize,
    n: usize,
    #[serde(rename = "N")]
    demand: Vec<u32>,
    #[serde(rename = "S_min")]
    service_min: Vec<f64>,
    #[serde(rename = "T_min")]
    time_min: Vec<Vec<f64>>,
    #[serde(rename = "D_mi")]
    dist_mi: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    capacity: u32,
    #[serde(rename = "Tbar_min")]
    max_time_min: f64,
    #[serde(rename = "Dbar_mi")]
    max_dist_mi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl TcvrpInstance {
    /// Checks shape, signs and the per-node round-trip limits.
    pub fn new(
        demand: Vec<u32>,
        service_min: Vec<f64>,
        time_min: Vec<Vec<f64>>,
        dist_mi: Vec<Vec<f64>>,
        capacity: u32,
        max_time_min: f64,
        max_dist_mi: Option<f64>,
    ) -> Result<Self> {
        let n = time_min.len().saturating_sub(1);
        let inst = Self {
            depot: 0,
            n,
            demand,
            service_min,
            time_min,
            dist_mi,
            capacity,
            max_time_min,
            max_dist_mi,
            seed: None,
        };
        inst.check()?;
        Ok(inst)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    fn check(&self) -> Result<()> {
        let size = self.n + 1;
        if self.depot != 0 {
            return Err(Error::InvalidInstance("depot must be node 0".into()));
        }
        if self.time_min.is_empty() {
            return Err(Error::InvalidInstance("matrices must include the depot".into()));
        }
        if self.demand.len() != size || self.service_min.len() != size {
            return Err(Error::InvalidInstance(format!(
                "N and S_min must have n + 1 = {size} entries"
            )));
        }
        for (name, m) in [("T_min", &self.time_min), ("D_mi", &self.dist_mi)] {
            if m.len() != size || m.iter().any(|r| r.len() != size) {
                return Err(Error::InvalidInstance(format!("{name} must be {size}x{size}")));
            }
            for (i, row) in m.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(Error::InvalidInstance(format!(
                            "{name}[{i}][{j}] = {v} is not a finite nonnegative value"
                        )));
                    }
                    if i == j && v != 0.0 {
                        return Err(Error::InvalidInstance(format!("{name}[{i}][{i}] must be 0")));
                    }
                }
            }
        }
        if self.capacity == 0 {
            return Err(Error::InvalidInstance("Q must be positive".into()));
        }
        if !(self.max_time_min > 0.0) {
            return Err(Error::InvalidInstance("Tbar_min must be positive".into()));
        }
        if let Some(d) = self.max_dist_mi {
            if !(d > 0.0) {
                return Err(Error::InvalidInstance("Dbar_mi must be positive".into()));
            }
        }
        if self.demand[0] != 0 || self.service_min[0] != 0.0 {
            return Err(Error::InvalidInstance("depot entries of N and S_min must be 0".into()));
        }
        for i in 1..size {
            if self.demand[i] == 0 {
                return Err(Error::InfeasibleNode {
                    node: i,
                    bound: "N_i >= 1".into(),
                });
            }
            if !(self.service_min[i] >= 0.0 && self.service_min[i].is_finite()) {
                return Err(Error::InvalidInstance(format!("S_min[{i}] must be nonnegative")));
            }
            if self.demand[i] > self.capacity {
                return Err(Error::InfeasibleNode {
                    node: i,
                    bound: format!("capacity: N_i = {} > Q = {}", self.demand[i], self.capacity),
                });
            }
            let round = self.time_min[0][i] + self.service_min[i] + self.time_min[i][0];
            if round > self.max_time_min + crate::FEAS_TOL {
                return Err(Error::InfeasibleNode {
                    node: i,
                    bound: format!(
                        "time: T_0i + S_i + T_i0 = {round:.4} > Tbar = {}",
                        self.max_time_min
                    ),
                });
            }
            if let Some(dbar) = self.max_dist_mi {
                let round = self.dist_mi[0][i] + self.dist_mi[i][0];
                if round > dbar + crate::FEAS_TOL {
                    return Err(Error::InfeasibleNode {
                        node: i,
                        bound: format!("distance: D_0i + D_i0 = {round:.4} > Dbar = {dbar}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(s)?;
        if inst.time_min.len() != inst.n + 1 {
            return Err(Error::InvalidInstance(format!(
                "n = {} but T_min has {} rows",
                inst.n,
                inst.time_min.len()
            )));
        }
        inst.check()?;
        Ok(inst)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    /// Number of super-locations (customer nodes).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn demand(&self, i: usize) -> u32 {
        self.demand[i]
    }

    pub fn service(&self, i: usize) -> f64 {
        self.service_min[i]
    }

    pub fn time(&self, i: usize, j: usize) -> f64 {
        self.time_min[i][j]
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist_mi[i][j]
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn max_time(&self) -> f64 {
        self.max_time_min
    }

    pub fn max_dist(&self) -> Option<f64> {
        self.max_dist_mi
    }

    pub fn demands(&self) -> &[u32] {
        &self.demand
    }

    pub fn services(&self) -> &[f64] {
        &self.service_min
    }

    pub fn time_matrix(&self) -> &[Vec<f64>] {
        &self.time_min
    }

    pub fn dist_matrix(&self) -> &[Vec<f64>] {
        &self.dist_mi
    }

    pub fn total_demand(&self) -> u64 {
        self.demand.iter().map(|&d| d as u64).sum()
    }

    /// Same matrices and nodes under different route limits.
    pub fn with_limits(&self, capacity: u32, max_time_min: f64, max_dist_mi: Option<f64>) -> Result<Self> {
        let mut inst = self.clone();
        inst.capacity = capacity;
        inst.max_time_min = max_time_min;
        inst.max_dist_mi = max_dist_mi;
        inst.check()?;
        Ok(inst)
    }
}
