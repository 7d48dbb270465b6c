//! Shared fixtures and brute-force oracles for integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tcvrp::TcvrpInstance;

/// Metric closure of a random asymmetric matrix (Floyd–Warshall).
pub fn metric(n: usize, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { rng.gen_range(lo..hi) })
                .collect()
        })
        .collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if m[i][k] + m[k][j] < m[i][j] {
                    m[i][j] = m[i][k] + m[k][j];
                }
            }
        }
    }
    m
}

/// Random instance with binding limits. Even seeds carry a range limit.
pub fn random_instance(seed: u64, n: usize) -> TcvrpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = metric(n + 1, &mut rng, 1.0, 20.0);
    let t = metric(n + 1, &mut rng, 2.0, 40.0);
    let mut demand: Vec<u32> = (0..=n).map(|_| rng.gen_range(1..=6)).collect();
    demand[0] = 0;
    let mut service: Vec<f64> = (0..=n).map(|_| rng.gen_range(1.0..10.0)).collect();
    service[0] = 0.0;
    let max_demand = *demand.iter().max().unwrap();
    let q = rng.gen_range(max_demand..=max_demand * 3);
    let trip_t = (1..=n)
        .map(|i| t[0][i] + service[i] + t[i][0])
        .fold(0.0, f64::max);
    let trip_d = (1..=n).map(|i| d[0][i] + d[i][0]).fold(0.0, f64::max);
    let tbar = trip_t * rng.gen_range(1.0..2.5);
    let dbar = (seed % 2 == 0).then(|| trip_d * rng.gen_range(1.0..2.5));
    TcvrpInstance::new(demand, service, t, d, q, tbar, dbar).unwrap()
}

/// Optimal total distance by enumerating every ordered partition of the
/// customers into routes; None when nothing is feasible.
pub fn brute_force(inst: &TcvrpInstance) -> Option<f64> {
    let n = inst.n();
    let full = (1usize << n) - 1;
    let mut route = vec![f64::INFINITY; full + 1];
    route[0] = 0.0;
    for mask in 1..=full {
        let mut members: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect();
        let load: u64 = members.iter().map(|&v| inst.demand(v) as u64).sum();
        if load > inst.capacity() as u64 {
            continue;
        }
        let mut best = f64::INFINITY;
        permute(&mut members, 0, &mut |p| {
            let mut prev = 0;
            let (mut t, mut d) = (0.0, 0.0);
            for &v in p.iter().chain(std::iter::once(&0)) {
                t += inst.time(prev, v) + inst.service(v);
                d += inst.dist(prev, v);
                prev = v;
            }
            let ok_t = t <= inst.max_time() + 1e-6;
            let ok_d = inst.max_dist().map_or(true, |m| d <= m + 1e-6);
            if ok_t && ok_d && d < best {
                best = d;
            }
        });
        route[mask] = best;
    }
    let mut part = vec![f64::INFINITY; full + 1];
    part[0] = 0.0;
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        // blocks containing the lowest member
        let mut sub = rest;
        loop {
            let block = sub | low;
            let c = route[block] + part[mask ^ block];
            if c < part[mask] {
                part[mask] = c;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    part[full].is_finite().then_some(part[full])
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}
