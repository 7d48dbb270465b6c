//! One-at-a-time parameter sweeps over prepared depots.
//!
//! Each axis varies one of Q, T̄, P, D̄ with the others held at the axis
//! base. With the ITS solver, cells of an axis are solved from the
//! tightest value to the loosest, each depot warm-starting from its
//! previous cell's routes with route opening disabled. A loosened cell
//! keeps every earlier route feasible, so per-depot VMT and fleet size
//! never increase along the chain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::InstanceParams;
use crate::error::{Error, Result};
use crate::exact::{solve_exact_with, ExactConfig, Status};
use crate::instance::TcvrpInstance;
use crate::its::{best_of_runs, best_of_runs_from, ItsConfig};
use crate::metrics::{summarize, EnergyParams, GapStats, ScenarioKey, ScenarioReport, VehicleType};
use crate::model::Solution;
use crate::pipeline::PreparedDepot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Capacity,
    MaxTime,
    Dwell,
    Range,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::Capacity => "Q",
            Axis::MaxTime => "Tbar_h",
            Axis::Dwell => "P_min",
            Axis::Range => "Dbar_mi",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseParams {
    pub capacity: u32,
    pub max_time_h: f64,
    pub dwell_min: f64,
    pub range_mi: f64,
}

impl Default for BaseParams {
    fn default() -> Self {
        use crate::defaults::*;
        Self {
            capacity: CAPACITY,
            max_time_h: MAX_TIME_H,
            dwell_min: DWELL_MIN,
            range_mi: BEV_RANGE_MI,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSweep {
    pub axis: Axis,
    pub values: Vec<f64>,
    #[serde(default)]
    pub base: BaseParams,
}

impl AxisSweep {
    fn params(&self, value: f64, vehicle: VehicleType) -> (ScenarioKey, InstanceParams) {
        let mut b = self.base;
        match self.axis {
            Axis::Capacity => b.capacity = value.round() as u32,
            Axis::MaxTime => b.max_time_h = value,
            Axis::Dwell => b.dwell_min = value,
            Axis::Range => b.range_mi = value,
        }
        let range = (vehicle == VehicleType::Bev).then_some(b.range_mi);
        (
            ScenarioKey {
                city: String::new(),
                capacity: b.capacity,
                max_time_h: b.max_time_h,
                dwell_min: b.dwell_min,
                max_dist_mi: range,
                vehicle,
            },
            InstanceParams {
                capacity: b.capacity,
                max_time_min: b.max_time_h * 60.0,
                dwell_min: b.dwell_min,
                max_dist_mi: range,
            },
        )
    }

    /// Value indices from tightest to loosest.
    fn chain_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| {
            let (x, y) = (self.values[a], self.values[b]);
            match self.axis {
                Axis::Dwell => y.total_cmp(&x),
                _ => x.total_cmp(&y),
            }
            .then(a.cmp(&b))
        });
        idx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    /// Exact up to `auto_exact_max_nodes` super-locations, ITS above.
    Auto,
    Exact,
    Its,
}

impl std::str::FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "exact" => Ok(Self::Exact),
            "its" => Ok(Self::Its),
            other => Err(Error::InvalidInput(format!("unknown solver {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub city: String,
    pub axes: Vec<AxisSweep>,
    pub vehicles: Vec<VehicleType>,
    pub solver: SolverChoice,
    pub its: ItsConfig,
    pub runs: usize,
    pub exact_time_limit_s: f64,
    pub auto_exact_max_nodes: usize,
    pub energy: EnergyParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let base = BaseParams::default();
        Self {
            city: "synthetic".into(),
            axes: vec![
                AxisSweep {
                    axis: Axis::Capacity,
                    values: vec![120.0, 150.0, 180.0, 210.0, 240.0],
                    base,
                },
                AxisSweep {
                    axis: Axis::MaxTime,
                    values: vec![10.0, 11.0, 12.0, 13.0, 14.0, 15.0],
                    base: BaseParams {
                        dwell_min: 4.0,
                        ..base
                    },
                },
                AxisSweep {
                    axis: Axis::Dwell,
                    values: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
                    base,
                },
                AxisSweep {
                    axis: Axis::Range,
                    values: vec![60.0, 80.0, 100.0, 120.0],
                    base,
                },
            ],
            vehicles: vec![VehicleType::Bev, VehicleType::Cv],
            solver: SolverChoice::Its,
            its: ItsConfig {
                time_budget_s: 60.0,
                ..Default::default()
            },
            runs: 1,
            exact_time_limit_s: 300.0,
            auto_exact_max_nodes: 60,
            energy: EnergyParams::default(),
        }
    }
}

impl SweepConfig {
    pub fn check(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.iter().any(|a| a.values.is_empty()) {
            return Err(Error::InvalidInput("sweep axes need values".into()));
        }
        if self.vehicles.is_empty() {
            return Err(Error::InvalidInput("sweep needs a vehicle type".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidInput("runs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub axis: Axis,
    pub value: f64,
    pub vehicle: VehicleType,
    pub depot: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: Axis,
    pub value: f64,
    pub report: ScenarioReport,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<CellFailure>,
}

impl SweepOutcome {
    pub fn reports(&self) -> Vec<ScenarioReport> {
        self.rows.iter().map(|r| r.report.clone()).collect()
    }

    /// Rows of one axis and vehicle, in configured value order.
    pub fn series(&self, axis: Axis, vehicle: VehicleType) -> Vec<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.axis == axis && r.report.key.vehicle == vehicle)
            .collect()
    }
}

struct Solved {
    instance: TcvrpInstance,
    solution: Solution,
    exact: Option<(f64, Status)>,
}

fn solve_cell(
    inst: TcvrpInstance,
    cfg: &SweepConfig,
    warm: Option<&Solution>,
) -> Result<Solved> {
    let use_exact = match cfg.solver {
        SolverChoice::Exact => true,
        SolverChoice::Its => false,
        SolverChoice::Auto => inst.n() <= cfg.auto_exact_max_nodes,
    };
    if use_exact {
        let r = solve_exact_with(
            &inst,
            &ExactConfig {
                time_limit_s: cfg.exact_time_limit_s,
                seed: cfg.its.seed,
                ..Default::default()
            },
        )?;
        let solution = r
            .solution
            .ok_or_else(|| Error::InvalidInput(format!("exact solver ended {}", r.status)))?;
        return Ok(Solved {
            instance: inst,
            solution,
            exact: Some((r.lower, r.status)),
        });
    }
    let result = match warm {
        Some(w) => best_of_runs_from(
            &inst,
            &ItsConfig {
                open_routes: false,
                ..cfg.its.clone()
            },
            cfg.runs,
            Some(w),
        )?,
        None => best_of_runs(&inst, &cfg.its, cfg.runs)?,
    };
    Ok(Solved {
        instance: inst,
        solution: result.solution,
        exact: None,
    })
}

/// Runs every axis for every vehicle type. Failed depot cells are
/// recorded and their rows omitted; the sweep carries on.
pub fn run_sweep(depots: &[PreparedDepot], cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.check()?;
    let mut out = SweepOutcome::default();
    for axis in &cfg.axes {
        for &vehicle in &cfg.vehicles {
            if axis.axis == Axis::Range && vehicle == VehicleType::Cv {
                continue;
            }
            let order = axis.chain_order();
            // per depot: cell results indexed by value position
            let per_depot: Vec<Vec<std::result::Result<Solved, String>>> = depots
                .par_iter()
                .map(|d| {
                    let mut cells: Vec<Option<std::result::Result<Solved, String>>> =
                        (0..axis.values.len()).map(|_| None).collect();
                    let mut prev: Option<Solution> = None;
                    for &k in &order {
                        let (_, params) = axis.params(axis.values[k], vehicle);
                        let res = d
                            .instance(&params)
                            .and_then(|inst| solve_cell(inst, cfg, prev.as_ref()));
                        match &res {
                            Ok(s) => prev = Some(s.solution.clone()),
                            Err(e) => {
                                log::warn!("{} {}={} {}: {e}", d.depot_id, axis.axis, axis.values[k], vehicle);
                                prev = None;
                            }
                        }
                        cells[k] = Some(res.map_err(|e| e.to_string()));
                    }
                    cells.into_iter().map(|c| c.expect("every cell visited")).collect()
                })
                .collect();

            for (k, &value) in axis.values.iter().enumerate() {
                let (mut key, _) = axis.params(value, vehicle);
                key.city = cfg.city.clone();
                let mut pairs = Vec::new();
                let mut failed = false;
                for (d, cells) in depots.iter().zip(&per_depot) {
                    match &cells[k] {
                        Ok(s) => pairs.push(s),
                        Err(e) => {
                            failed = true;
                            out.failures.push(CellFailure {
                                axis: axis.axis,
                                value,
                                vehicle,
                                depot: d.depot_id.clone(),
                                error: e.clone(),
                            });
                        }
                    }
                }
                if failed {
                    continue;
                }
                let refs: Vec<(&TcvrpInstance, &Solution)> =
                    pairs.iter().map(|s| (&s.instance, &s.solution)).collect();
                let mut report = match summarize(&refs, key, &cfg.energy) {
                    Ok(r) => r,
                    Err(e) => {
                        out.failures.push(CellFailure {
                            axis: axis.axis,
                            value,
                            vehicle,
                            depot: String::new(),
                            error: e.to_string(),
                        });
                        continue;
                    }
                };
                report.gaps = gap_stats(&pairs);
                out.rows.push(SweepRow {
                    axis: axis.axis,
                    value,
                    report,
                });
            }
        }
    }
    Ok(out)
}

fn gap_stats(cells: &[&Solved]) -> Option<GapStats> {
    let exact: Vec<(f64, f64, Status)> = cells
        .iter()
        .filter_map(|s| s.exact.map(|(lo, st)| (lo, s.solution.vmt_mi, st)))
        .collect();
    if exact.is_empty() {
        return None;
    }
    let gaps: Vec<f64> = exact
        .iter()
        .map(|&(lo, up, _)| crate::metrics::mip_gap(lo.min(up).max(0.0), up).unwrap_or(0.0))
        .collect();
    Some(GapStats {
        instances: exact.len(),
        optimal: exact.iter().filter(|e| e.2 == Status::Optimal).count(),
        mean_mip_gap: gaps.iter().sum::<f64>() / gaps.len() as f64,
        max_mip_gap: gaps.iter().copied().fold(0.0, f64::max),
    })
}
