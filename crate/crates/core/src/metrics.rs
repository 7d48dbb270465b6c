//! Optimality gaps, energy accounting and scenario reports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::TcvrpInstance;
use crate::model::{validate, Solution};

/// Percent MIP gap `(1 - lower/upper) * 100`.
pub fn mip_gap(lower: f64, upper: f64) -> Result<f64> {
    if upper == 0.0 {
        return Err(Error::Gap("upper bound is zero"));
    }
    if !(0.0..=upper).contains(&lower) {
        return Err(Error::Gap("need 0 <= lower <= upper"));
    }
    Ok((upper - lower) * 100.0 / upper)
}

/// Percent gap of a heuristic's best-found cost against an exact lower
/// bound, `(1 - best/lower) * 100`. Negative whenever `best > lower`; the
/// sign is kept as is.
pub fn its_gap(best: f64, lower: f64) -> Result<f64> {
    if lower == 0.0 {
        return Err(Error::Gap("lower bound is zero"));
    }
    Ok((lower - best) * 100.0 / lower)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub bev_kwh_per_mile: f64,
    pub cv_mpg: f64,
    pub diesel_kwh_per_gallon: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            bev_kwh_per_mile: 1.14,
            cv_mpg: 8.0,
            diesel_kwh_per_gallon: 40.15,
        }
    }
}

impl EnergyParams {
    pub fn new(bev_kwh_per_mile: f64, cv_mpg: f64, diesel_kwh_per_gallon: f64) -> Result<Self> {
        if !(bev_kwh_per_mile > 0.0 && cv_mpg > 0.0 && diesel_kwh_per_gallon > 0.0) {
            return Err(Error::InvalidInput("energy parameters must be positive".into()));
        }
        Ok(Self {
            bev_kwh_per_mile,
            cv_mpg,
            diesel_kwh_per_gallon,
        })
    }

    pub fn cv_kwh_per_mile(&self) -> f64 {
        self.diesel_kwh_per_gallon / self.cv_mpg
    }
}

/// `(bev_kwh, cv_kwh)` for `vmt` miles.
pub fn energy(vmt: f64, p: &EnergyParams) -> (f64, f64) {
    (vmt * p.bev_kwh_per_mile, vmt * p.cv_kwh_per_mile())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleType {
    Bev,
    Cv,
}

impl std::fmt::Display for VehicleType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VehicleType::Bev => "bev",
            VehicleType::Cv => "cv",
        })
    }
}

impl std::str::FromStr for VehicleType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bev" => Ok(Self::Bev),
            "cv" => Ok(Self::Cv),
            other => Err(Error::InvalidInput(format!("unknown vehicle type {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioKey {
    pub city: String,
    pub capacity: u32,
    pub max_time_h: f64,
    pub dwell_min: f64,
    /// Range limit; `None` for conventional vehicles.
    pub max_dist_mi: Option<f64>,
    pub vehicle: VehicleType,
}

/// Aggregate of exact-solver bounds across the depots of a scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub instances: usize,
    pub optimal: usize,
    pub mean_mip_gap: f64,
    pub max_mip_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub key: ScenarioKey,
    pub vmt_mi: f64,
    pub vht_h: f64,
    pub vehicles: usize,
    pub vmt_per_vehicle: f64,
    pub bev_kwh: f64,
    pub cv_kwh: f64,
    pub gaps: Option<GapStats>,
}

/// Sums validated per-depot solutions into one report. Every total is
/// recomputed from the routes.
pub fn summarize(
    solutions: &[(&TcvrpInstance, &Solution)],
    key: ScenarioKey,
    energy_params: &EnergyParams,
) -> Result<ScenarioReport> {
    let mut vmt = 0.0;
    let mut vht_min = 0.0;
    let mut vehicles = 0;
    for (idx, (inst, sol)) in solutions.iter().enumerate() {
        let rep = validate(inst, sol)?;
        if !rep.feasible {
            return Err(Error::Unvalidated(format!(
                "depot {idx}: {}",
                rep.violations
                    .iter()
                    .map(|v| v.detail.as_str())
                    .collect::<Vec<_>>()
                    .join("; ")
            )));
        }
        vmt += rep.routes.iter().map(|r| r.dist_mi).sum::<f64>();
        vht_min += rep.routes.iter().map(|r| r.time_min).sum::<f64>();
        vehicles += rep.routes.len();
    }
    let (bev_kwh, cv_kwh) = energy(vmt, energy_params);
    Ok(ScenarioReport {
        key,
        vmt_mi: vmt,
        vht_h: vht_min / 60.0,
        vehicles,
        vmt_per_vehicle: if vehicles > 0 { vmt / vehicles as f64 } else { 0.0 },
        bev_kwh,
        cv_kwh,
        gaps: None,
    })
}

pub const CSV_HEADER: [&str; 12] = [
    "city",
    "Q",
    "Tbar_h",
    "P_min",
    "Dbar_mi",
    "vehicle_type",
    "vmt_mi",
    "vht_h",
    "vehicles",
    "vmt_per_vehicle",
    "bev_kwh",
    "cv_kwh",
];

/// Writes reports as CSV; an absent range is an empty field.
pub fn write_csv<W: Write>(out: W, reports: &[ScenarioReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.key.city.clone(),
            r.key.capacity.to_string(),
            r.key.max_time_h.to_string(),
            r.key.dwell_min.to_string(),
            r.key.max_dist_mi.map(|d| d.to_string()).unwrap_or_default(),
            r.key.vehicle.to_string(),
            r.vmt_mi.to_string(),
            r.vht_h.to_string(),
            r.vehicles.to_string(),
            r.vmt_per_vehicle.to_string(),
            r.bev_kwh.to_string(),
            r.cv_kwh.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_examples() {
        assert_eq!(mip_gap(100.0, 100.0).unwrap(), 0.0);
        assert_eq!(mip_gap(90.0, 100.0).unwrap(), 10.0);
        assert_eq!(mip_gap(0.0, 100.0).unwrap(), 100.0);
        assert!(mip_gap(1.0, 0.0).is_err());
        assert!(mip_gap(2.0, 1.0).is_err());
        assert_eq!(its_gap(42.0, 42.0).unwrap(), 0.0);
        let g = its_gap(100.0, 99.0).unwrap();
        assert!((g - (-100.0 / 99.0)).abs() < 1e-12);
        assert!(its_gap(1.0, 0.0).is_err());
    }

    #[test]
    fn energy_examples() {
        let p = EnergyParams::default();
        assert_eq!(energy(0.0, &p), (0.0, 0.0));
        let (b, c) = energy(100.0, &p);
        assert!((b - 114.0).abs() < 1e-9 && (c - 501.875).abs() < 1e-9);
        let (b, c) = energy(80.0, &p);
        assert!((b - 91.2).abs() < 1e-9 && (c - 401.5).abs() < 1e-9);
        assert!(EnergyParams::new(0.0, 8.0, 40.15).is_err());
    }

    fn one_node(t: f64, d: f64) -> TcvrpInstance {
        TcvrpInstance::new(
            vec![0, 1],
            vec![0.0, 0.0],
            vec![vec![0.0, t / 2.0], vec![t / 2.0, 0.0]],
            vec![vec![0.0, d / 2.0], vec![d / 2.0, 0.0]],
            10,
            600.0,
            None,
        )
        .unwrap()
    }

    fn key() -> ScenarioKey {
        ScenarioKey {
            city: "test".into(),
            capacity: 10,
            max_time_h: 10.0,
            dwell_min: 2.0,
            max_dist_mi: None,
            vehicle: VehicleType::Cv,
        }
    }

    #[test]
    fn summarize_single_and_pair() {
        let a = one_node(120.0, 10.0);
        let sa = Solution::from_routes(&a, vec![vec![0, 1, 0]]).unwrap();
        let r = summarize(&[(&a, &sa)], key(), &EnergyParams::default()).unwrap();
        assert_eq!((r.vmt_mi, r.vht_h, r.vehicles), (10.0, 2.0, 1));
        let b = one_node(60.0, 4.0);
        let sb = Solution::from_routes(&b, vec![vec![0, 1, 0]]).unwrap();
        let r2 = summarize(&[(&a, &sa), (&b, &sb)], key(), &EnergyParams::default()).unwrap();
        assert_eq!((r2.vmt_mi, r2.vht_h, r2.vehicles), (14.0, 3.0, 2));
        assert_eq!(r2.vmt_per_vehicle, 7.0);
    }

    #[test]
    fn summarize_rejects_invalid() {
        let a = one_node(120.0, 10.0);
        let bad = Solution::from_routes(&a, vec![]).unwrap();
        assert!(matches!(
            summarize(&[(&a, &bad)], key(), &EnergyParams::default()),
            Err(Error::Unvalidated(_))
        ));
    }

    #[test]
    fn csv_header() {
        let a = one_node(120.0, 10.0);
        let sa = Solution::from_routes(&a, vec![vec![0, 1, 0]]).unwrap();
        let r = summarize(&[(&a, &sa)], key(), &EnergyParams::default()).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "city,Q,Tbar_h,P_min,Dbar_mi,vehicle_type,vmt_mi,vht_h,vehicles,vmt_per_vehicle,bev_kwh,cv_kwh"
        );
        assert!(lines.next().unwrap().starts_with("test,10,10,2,,cv,10,2,1,10,"));
    }
}
