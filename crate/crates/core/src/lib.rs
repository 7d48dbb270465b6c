//! Time-constrained, capacitated and optionally range-constrained vehicle
//! routing for last-mile parcel delivery.
//!
//! The crate covers the whole path from a road network and household
//! locations to routed fleets:
//!
//! - [`network`]: time-shortest path matrices over a directed road network
//! - [`assign`]: provider split and capacitated customer-to-depot assignment
//! - [`aggregate`]: arc-midpoint super-locations and instance construction
//! - [`tsp`]: tours inside a super-location
//! - [`model`]: the arc-flow MIP, MPS export and solution validation
//! - [`exact`]: branch-and-bound with an assignment relaxation
//! - [`its`]: iterated tabu search
//! - [`metrics`]: gaps, energy and scenario reports
//! - [`city`], [`pipeline`], [`sweep`]: synthetic cities and experiment runs

pub mod aggregate;
pub mod assign;
pub mod city;
pub mod error;
pub mod exact;
pub mod instance;
pub mod its;
pub mod metrics;
pub mod model;
pub mod network;
pub mod pipeline;
pub mod sweep;
pub mod tsp;

pub use error::{Error, Result};
pub use instance::TcvrpInstance;
pub use model::{validate, Solution};

/// Absolute tolerance for constraint satisfaction (minutes, miles, packages).
pub const FEAS_TOL: f64 = 1e-6;

/// Project-wide baseline route limits.
pub mod defaults {
    /// Packages per vehicle.
    pub const CAPACITY: u32 = 120;
    /// Route duration limit in hours.
    pub const MAX_TIME_H: f64 = 10.0;
    /// Dwell minutes per customer.
    pub const DWELL_MIN: f64 = 2.0;
    /// Battery-electric range in miles.
    pub const BEV_RANGE_MI: f64 = 80.0;
    /// Walking/driving speed inside a super-location, mph.
    pub const INTRA_SPEED_MPH: f64 = 15.0;
}
