//! Property tests over randomly generated instances and inputs.

mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tcvrp::assign::{assign_to_depots, Customer, DepotSite};
use tcvrp::its::{solve_its, ItsConfig};
use tcvrp::metrics::{its_gap, mip_gap};
use tcvrp::model::{build_mip, induced_values};
use tcvrp::tsp::{solve_exact as tsp_exact, TspInstance};
use tcvrp::{validate, Solution};

/// Random split of a random customer order into routes `[0, .., 0]`.
fn random_routes(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut routes = Vec::new();
    let mut cur = vec![0];
    for (k, c) in order.into_iter().enumerate() {
        if k > 0 && rng.gen_bool(0.35) {
            cur.push(0);
            routes.push(std::mem::replace(&mut cur, vec![0]));
        }
        cur.push(c);
    }
    cur.push(0);
    routes.push(cur);
    routes
}

fn manhattan(a: &Customer, d: &DepotSite) -> f64 {
    (a.x - d.x).abs() + (a.y - d.y).abs()
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn its_is_feasible_and_deterministic(seed in any::<u64>(), n in 1usize..=12, run_seed in 0u64..1000) {
        let inst = common::random_instance(seed, n);
        let cfg = ItsConfig { seed: run_seed, time_budget_s: 60.0, max_idle_rounds: 10, ..Default::default() };
        let a = solve_its(&inst, &cfg).unwrap();
        prop_assert!(!a.timed_out);
        prop_assert!(validate(&inst, &a.solution).unwrap().feasible);
        let recomputed = Solution::from_routes(&inst, a.solution.routes.clone()).unwrap();
        prop_assert!((recomputed.vmt_mi - a.cost).abs() < 1e-9);
        let b = solve_its(&inst, &cfg).unwrap();
        prop_assert_eq!(a.solution.routes, b.solution.routes);
        prop_assert_eq!(a.cost.to_bits(), b.cost.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    /// The validator and the MIP rows agree on random route plans.
    #[test]
    fn validator_matches_mip_rows(seed in any::<u64>(), n in 1usize..=7, plan in any::<u64>()) {
        let inst = common::random_instance(seed, n);
        let mip = build_mip(&inst).unwrap();
        let routes = random_routes(n, &mut ChaCha8Rng::seed_from_u64(plan));
        let sol = Solution::from_routes(&inst, routes.clone()).unwrap();
        let verdict = validate(&inst, &sol).unwrap().feasible;
        let x = induced_values(&inst, &routes);
        prop_assert_eq!(verdict, mip.is_feasible(&x));
        if verdict {
            prop_assert!((mip.objective_value(&x) - sol.vmt_mi).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn depot_assignment_is_capacitated_and_optimal(
        pts in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..=7),
        depots in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0, 1u64..=4), 2..=3),
    ) {
        let customers: Vec<Customer> =
            pts.iter().enumerate().map(|(i, &(x, y))| Customer::new(i as u64, x, y)).collect();
        let sites: Vec<DepotSite> = depots
            .iter()
            .enumerate()
            .map(|(i, &(x, y, capacity))| DepotSite { id: format!("D{i}"), x, y, capacity })
            .collect();
        let total_cap: u64 = sites.iter().map(|d| d.capacity).sum();
        let res = assign_to_depots(&customers, &sites);
        if total_cap < customers.len() as u64 {
            prop_assert!(res.is_err());
            return Ok(());
        }
        let a = res.unwrap();
        let mut seen = vec![0; customers.len()];
        let mut cost = 0.0;
        for ((id, ids), site) in a.depots.iter().zip(&sites) {
            prop_assert_eq!(id, &site.id);
            prop_assert!(ids.len() as u64 <= site.capacity);
            for &c in ids {
                seen[c as usize] += 1;
                cost += manhattan(&customers[c as usize], site);
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        prop_assert!((cost - a.total_distance).abs() < 1e-9);

        // enumerate every capacity-feasible assignment
        let (m, k) = (customers.len(), sites.len());
        let mut best = f64::INFINITY;
        for code in 0..k.pow(m as u32) {
            let mut load = vec![0u64; k];
            let mut c = code;
            let mut total = 0.0;
            for cust in &customers {
                let d = c % k;
                c /= k;
                load[d] += 1;
                total += manhattan(cust, &sites[d]);
            }
            if load.iter().zip(&sites).all(|(l, s)| *l <= s.capacity) {
                best = best.min(total);
            }
        }
        prop_assert!((a.total_distance - best).abs() < 1e-9);
    }

    #[test]
    fn held_karp_matches_permutations(seed in any::<u64>(), n in 1usize..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { rng.gen_range(0.5..9.0) }).collect())
            .collect();
        let inst = TspInstance::new(cost).unwrap();
        let tour = tsp_exact(&inst).unwrap();
        prop_assert!(tour.exact);
        prop_assert_eq!(tour.nodes.first(), Some(&0));
        prop_assert_eq!(tour.nodes.last(), Some(&0));
        let mut visited = tour.nodes[..tour.nodes.len() - 1].to_vec();
        visited.sort_unstable();
        prop_assert_eq!(visited, (0..n).collect::<Vec<_>>());
        prop_assert!((inst.tour_cost(&tour.nodes) - tour.cost).abs() < 1e-9);

        let mut rest: Vec<usize> = (1..n).collect();
        let mut all = Vec::new();
        permutations(&mut rest, 0, &mut all);
        let best = all
            .iter()
            .map(|p| {
                let mut t = vec![0];
                t.extend(p);
                t.push(0);
                inst.tour_cost(&t)
            })
            .fold(f64::INFINITY, f64::min);
        prop_assert!((tour.cost - best).abs() < 1e-9);
    }

    #[test]
    fn gap_signs(lower in 0.0f64..1e4, extra in 0.0f64..1e4) {
        let upper = lower + extra + 1e-3;
        let g = mip_gap(lower, upper).unwrap();
        prop_assert!((0.0..=100.0).contains(&g));
        prop_assert!(mip_gap(upper, lower).is_err() || upper == lower);
        if lower > 0.0 {
            prop_assert_eq!(its_gap(lower, lower).unwrap(), 0.0);
            prop_assert!(its_gap(upper, lower).unwrap() < 0.0);
        }
    }
}
