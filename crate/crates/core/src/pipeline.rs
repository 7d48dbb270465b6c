//! City to per-depot instances: provider split, depot assignment,
//! clustering into super-locations, and travel matrices.
//!
//! Matrices and intra tours do not depend on route limits, so a
//! [`PreparedDepot`] is built once and turned into instances per parameter
//! set.

use std::collections::BTreeMap;

use log::info;
use serde::{Deserialize, Serialize};

use crate::aggregate::{build_instance, cluster_customers, nearest_arc, with_intra_tours, InstanceParams, SuperLocation};
use crate::assign::{assign_to_depots, default_capacity, split_by_provider, Customer, DepotSite, Point};
use crate::city::City;
use crate::error::{Error, Result};
use crate::instance::TcvrpInstance;
use crate::network::{ArcId, SquareMatrices};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Pool every depot regardless of provider.
    pub shared_economy: bool,
    /// Depot capacity multiplier over an even split.
    pub capacity_slack: f64,
    pub intra_speed_mph: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            shared_economy: false,
            capacity_slack: 1.2,
            intra_speed_mph: crate::defaults::INTRA_SPEED_MPH,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDepot {
    pub depot_id: String,
    /// Owning provider; `None` in shared-economy mode.
    pub provider: Option<String>,
    pub depot_arc: ArcId,
    pub super_locations: Vec<SuperLocation>,
    /// Node 0 is the depot, node `i` is `super_locations[i - 1]`.
    pub matrices: SquareMatrices,
}

impl PreparedDepot {
    pub fn customers(&self) -> usize {
        self.super_locations.iter().map(|s| s.members.len()).sum()
    }

    pub fn instance(&self, params: &InstanceParams) -> Result<TcvrpInstance> {
        build_instance(&self.super_locations, &self.matrices, params)
    }
}

/// Runs every stage up to the travel matrices. Depots that receive no
/// customers are dropped.
pub fn prepare(city: &City, cfg: &PipelineConfig) -> Result<Vec<PreparedDepot>> {
    let groups: Vec<(Option<String>, Vec<Customer>, Vec<&crate::city::ProviderDepot>)> = if cfg.shared_economy {
        vec![(None, city.customers.clone(), city.depots.iter().collect())]
    } else {
        let split = split_by_provider(&city.customers, &city.config.split, cfg.seed);
        let mut by_provider: BTreeMap<&str, Vec<&crate::city::ProviderDepot>> = BTreeMap::new();
        for d in &city.depots {
            by_provider.entry(d.provider.as_str()).or_default().push(d);
        }
        let mut out = Vec::new();
        for (provider, customers) in split {
            let depots = by_provider.remove(provider.as_str()).ok_or_else(|| {
                Error::InvalidInput(format!("provider {provider} has customers but no depot"))
            })?;
            out.push((Some(provider), customers, depots));
        }
        out
    };

    let mut prepared = Vec::new();
    for (provider, customers, depots) in groups {
        let cap = default_capacity(customers.len(), depots.len(), cfg.capacity_slack);
        let sites: Vec<DepotSite> = depots
            .iter()
            .map(|d| DepotSite {
                id: d.id.clone(),
                x: d.x,
                y: d.y,
                capacity: cap,
            })
            .collect();
        let assignment = assign_to_depots(&customers, &sites)?;
        let by_id: BTreeMap<u64, Customer> = customers.iter().map(|c| (c.id, *c)).collect();
        for (site, (depot_id, ids)) in sites.iter().zip(&assignment.depots) {
            if ids.is_empty() {
                continue;
            }
            let members: Vec<Customer> = ids.iter().map(|id| by_id[id]).collect();
            let sls = cluster_customers(&members, &city.network)?;
            let sls = with_intra_tours(sls, cfg.intra_speed_mph, cfg.seed);
            let depot_arc = nearest_arc(&city.network, &Point::new(site.x, site.y))?;
            let mut arcs = vec![depot_arc];
            arcs.extend(sls.iter().map(|s| s.arc));
            let matrices = city.network.midpoint_matrices(&arcs)?;
            info!(
                "depot {depot_id}: {} customers, {} super-locations",
                members.len(),
                sls.len()
            );
            prepared.push(PreparedDepot {
                depot_id: depot_id.clone(),
                provider: provider.clone(),
                depot_arc,
                super_locations: sls,
                matrices,
            });
        }
    }
    Ok(prepared)
}

/// Prepares the city and builds one instance per depot, tagged with the seed.
pub fn run(city: &City, cfg: &PipelineConfig, params: &InstanceParams) -> Result<Vec<(String, TcvrpInstance)>> {
    prepare(city, cfg)?
        .iter()
        .map(|d| Ok((d.depot_id.clone(), d.instance(params)?.with_seed(cfg.seed))))
        .collect()
}
