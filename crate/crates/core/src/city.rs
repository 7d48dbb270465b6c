//! Synthetic cities: a grid road network with random diagonals and speeds,
//! uniformly placed households, a sampled set of ordering households, and
//! provider depots at stratified random positions.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assign::{Customer, ProviderSplit};
use crate::error::{Error, Result};
use crate::network::{Arc, RoadNetwork, Vertex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CityConfig {
    pub name: String,
    /// Side of the square service area, miles.
    pub extent_mi: f64,
    /// Spacing of the street grid, miles.
    pub block_mi: f64,
    /// Probability that a grid cell gets a diagonal street.
    pub diagonal_prob: f64,
    pub speeds_mph: Vec<f64>,
    pub households: usize,
    pub ordering_rate: f64,
    pub split: ProviderSplit,
    /// Depots per provider, in split order.
    pub depots_per_provider: usize,
    pub seed: u64,
}

impl Default for CityConfig {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            extent_mi: 6.0,
            block_mi: 0.25,
            diagonal_prob: 0.1,
            speeds_mph: vec![25.0, 35.0, 45.0],
            households: 16_605,
            ordering_rate: 1.0 / 7.0,
            split: ProviderSplit::national(),
            depots_per_provider: 1,
            seed: 0,
        }
    }
}

impl CityConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.ordering_rate > 0.0 && self.ordering_rate <= 1.0) {
            return bad("ordering rate must lie in (0, 1]");
        }
        if !(self.extent_mi > 0.0) {
            return bad("extent must be positive");
        }
        if !(self.block_mi > 0.0 && self.block_mi <= self.extent_mi) {
            return bad("block size must be positive and at most the extent");
        }
        if !(0.0..=1.0).contains(&self.diagonal_prob) {
            return bad("diagonal probability must lie in [0, 1]");
        }
        if self.speeds_mph.is_empty() || self.speeds_mph.iter().any(|s| !(*s > 0.0)) {
            return bad("speeds must be positive");
        }
        ProviderSplit::new(self.split.shares().to_vec())?;
        if self.depots_per_provider == 0 {
            return bad("each provider needs a depot");
        }
        Ok(())
    }

    /// Ordering households: `round(households * rate)`.
    pub fn ordering_count(&self) -> usize {
        (self.households as f64 * self.ordering_rate).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderDepot {
    pub id: String,
    pub provider: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct City {
    pub config: CityConfig,
    pub network: RoadNetwork,
    pub customers: Vec<Customer>,
    pub depots: Vec<ProviderDepot>,
}

#[derive(Serialize, Deserialize)]
struct CustomersFile {
    seed: u64,
    customers: Vec<Customer>,
}

#[derive(Serialize, Deserialize)]
struct DepotsFile {
    seed: u64,
    depots: Vec<ProviderDepot>,
}

pub const NETWORK_FILE: &str = "network.json";
pub const CUSTOMERS_FILE: &str = "customers.json";
pub const DEPOTS_FILE: &str = "depots.json";
pub const CITY_FILE: &str = "city.json";

pub fn generate(cfg: &CityConfig) -> Result<City> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let network = grid_network(cfg, &mut rng)?;

    let households: Vec<(f64, f64)> = (0..cfg.households)
        .map(|_| (rng.gen_range(0.0..=cfg.extent_mi), rng.gen_range(0.0..=cfg.extent_mi)))
        .collect();
    let mut picked = rand::seq::index::sample(&mut rng, cfg.households, cfg.ordering_count().min(cfg.households)).into_vec();
    picked.sort_unstable();
    let customers = picked
        .into_iter()
        .map(|h| Customer::new(h as u64, households[h].0, households[h].1))
        .collect();

    let providers: Vec<String> = cfg.split.providers().map(str::to_string).collect();
    let total = providers.len() * cfg.depots_per_provider;
    let side = (total as f64).sqrt().ceil() as usize;
    let mut strata: Vec<usize> = (0..side * side).collect();
    strata.shuffle(&mut rng);
    let cell = cfg.extent_mi / side as f64;
    let mut depots = Vec::with_capacity(total);
    for (k, &s) in strata.iter().take(total).enumerate() {
        let provider = &providers[k % providers.len()];
        let (r, c) = (s / side, s % side);
        depots.push(ProviderDepot {
            id: format!("{}-{}", provider, k / providers.len() + 1),
            provider: provider.clone(),
            x: (c as f64 + rng.gen::<f64>()) * cell,
            y: (r as f64 + rng.gen::<f64>()) * cell,
        });
    }
    Ok(City {
        config: cfg.clone(),
        network,
        customers,
        depots,
    })
}

fn grid_network(cfg: &CityConfig, rng: &mut ChaCha8Rng) -> Result<RoadNetwork> {
    let cells = (cfg.extent_mi / cfg.block_mi).round().max(1.0) as usize;
    let side = cells + 1;
    let step = cfg.extent_mi / cells as f64;
    let id = |r: usize, c: usize| (r * side + c) as u64;
    let vertices: Vec<Vertex> = (0..side)
        .flat_map(|r| (0..side).map(move |c| (r, c)))
        .map(|(r, c)| Vertex {
            id: id(r, c),
            x: c as f64 * step,
            y: r as f64 * step,
        })
        .collect();
    let mut arcs = Vec::new();
    let mut street = |a: u64, b: u64, len: f64, rng: &mut ChaCha8Rng| {
        let speed = *cfg.speeds_mph.choose(rng).expect("nonempty speeds");
        for (from, to) in [(a, b), (b, a)] {
            arcs.push(Arc {
                id: arcs.len() as u64,
                from,
                to,
                length_mi: len,
                speed_mph: speed,
            });
        }
    };
    for r in 0..side {
        for c in 0..side {
            if c + 1 < side {
                street(id(r, c), id(r, c + 1), step, rng);
            }
            if r + 1 < side {
                street(id(r, c), id(r + 1, c), step, rng);
            }
            if r + 1 < side && c + 1 < side && rng.gen_bool(cfg.diagonal_prob) {
                let len = step * std::f64::consts::SQRT_2;
                if rng.gen_bool(0.5) {
                    street(id(r, c), id(r + 1, c + 1), len, rng);
                } else {
                    street(id(r, c + 1), id(r + 1, c), len, rng);
                }
            }
        }
    }
    RoadNetwork::new(vertices, arcs)
}

impl City {
    /// Writes the four city files into `dir`, each carrying the root seed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let seed = self.config.seed;
        let mut net: serde_json::Value = serde_json::from_str(&self.network.to_json_string()?)?;
        if let serde_json::Value::Object(m) = &mut net {
            m.insert("seed".into(), seed.into());
        }
        std::fs::write(dir.join(NETWORK_FILE), serde_json::to_string(&net)?)?;
        std::fs::write(
            dir.join(CUSTOMERS_FILE),
            serde_json::to_string(&CustomersFile {
                seed,
                customers: self.customers.clone(),
            })?,
        )?;
        std::fs::write(
            dir.join(DEPOTS_FILE),
            serde_json::to_string_pretty(&DepotsFile {
                seed,
                depots: self.depots.clone(),
            })?,
        )?;
        std::fs::write(dir.join(CITY_FILE), serde_json::to_string_pretty(&self.config)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let config: CityConfig = serde_json::from_str(&std::fs::read_to_string(dir.join(CITY_FILE))?)?;
        let network = RoadNetwork::load(dir.join(NETWORK_FILE))?;
        let customers: CustomersFile = serde_json::from_str(&std::fs::read_to_string(dir.join(CUSTOMERS_FILE))?)?;
        let depots: DepotsFile = serde_json::from_str(&std::fs::read_to_string(dir.join(DEPOTS_FILE))?)?;
        Ok(Self {
            config,
            network,
            customers: customers.customers,
            depots: depots.depots,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> CityConfig {
        CityConfig {
            extent_mi: 2.0,
            block_mi: 0.5,
            households: 500,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn full_rate_orders_everyone() {
        let city = generate(&CityConfig {
            ordering_rate: 1.0,
            ..small(1)
        })
        .unwrap();
        assert_eq!(city.customers.len(), 500);
    }

    #[test]
    fn one_seventh_of_households_order() {
        let cfg = CityConfig {
            households: 16_605,
            ..Default::default()
        };
        assert_eq!(cfg.ordering_count(), 2372);
        let city = generate(&cfg).unwrap();
        assert_eq!(city.customers.len(), 2372);
        assert!(city
            .customers
            .iter()
            .all(|c| (0.0..=6.0).contains(&c.x) && (0.0..=6.0).contains(&c.y)));
    }

    #[test]
    fn depots_per_provider_and_in_area() {
        let city = generate(&CityConfig {
            depots_per_provider: 2,
            ..small(4)
        })
        .unwrap();
        assert_eq!(city.depots.len(), 8);
        for p in city.config.split.providers() {
            assert_eq!(city.depots.iter().filter(|d| d.provider == p).count(), 2);
        }
        assert!(city.depots.iter().all(|d| d.x <= 2.0 && d.y <= 2.0));
    }

    #[test]
    fn network_is_strongly_connected() {
        let city = generate(&small(2)).unwrap();
        let ids: Vec<u64> = city.network.vertices().iter().map(|v| v.id).collect();
        assert!(city.network.shortest_paths(&ids[..1], &ids).is_ok());
        assert!(city.network.shortest_paths(&ids, &ids[..1]).is_ok());
    }

    #[test]
    fn files_are_byte_identical_for_a_seed() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate(&small(9)).unwrap().save(a.path()).unwrap();
        generate(&small(9)).unwrap().save(b.path()).unwrap();
        for f in [NETWORK_FILE, CUSTOMERS_FILE, DEPOTS_FILE, CITY_FILE] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap()
            );
        }
        let back = City::load(a.path()).unwrap();
        assert_eq!(back, generate(&small(9)).unwrap());
    }

    #[test]
    fn rejects_bad_rate() {
        assert!(generate(&CityConfig {
            ordering_rate: 0.0,
            ..small(1)
        })
        .is_err());
    }
}
