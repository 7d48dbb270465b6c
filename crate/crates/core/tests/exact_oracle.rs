mod common;

use common::{brute_force, random_instance};
use tcvrp::exact::{solve_exact, solve_exact_with, ExactConfig, Status};
use tcvrp::its::{best_of_runs, ItsConfig};
use tcvrp::model::{build_mip, induced_values};
use tcvrp::validate;

#[test]
fn exact_matches_enumeration() {
    for seed in 0..40 {
        let n = 1 + (seed as usize % 8);
        let inst = random_instance(seed, n);
        let oracle = brute_force(&inst).expect("instances pass construction checks");
        let r = solve_exact(&inst, 60.0).unwrap();
        assert_eq!(r.status, Status::Optimal, "seed {seed}");
        let got = r.upper.unwrap();
        assert!((got - oracle).abs() < 1e-6, "seed {seed}: {got} vs {oracle}");
        assert!(r.lower <= got + 1e-9);
        let sol = r.solution.unwrap();
        assert!(validate(&inst, &sol).unwrap().feasible);
        let mip = build_mip(&inst).unwrap();
        let x = induced_values(&inst, &sol.routes);
        assert!(mip.is_feasible(&x), "seed {seed}: {:?}", mip.violated_rows(&x).iter().map(|c| &c.name).collect::<Vec<_>>());
        assert!((mip.objective_value(&x) - got).abs() < 1e-6);
    }
}

#[test]
fn cold_start_agrees_with_warm_start() {
    for seed in 100..120 {
        let inst = random_instance(seed, 7);
        let warm = solve_exact(&inst, 60.0).unwrap();
        let cold = solve_exact_with(
            &inst,
            &ExactConfig {
                warm_start: false,
                time_limit_s: 60.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((warm.upper.unwrap() - cold.upper.unwrap()).abs() < 1e-6, "seed {seed}");
    }
}

#[test]
fn exact_is_deterministic() {
    let inst = random_instance(7, 8);
    let cfg = ExactConfig {
        warm_start: false,
        ..Default::default()
    };
    let a = solve_exact_with(&inst, &cfg).unwrap();
    let b = solve_exact_with(&inst, &cfg).unwrap();
    assert_eq!(a.solution, b.solution);
    assert_eq!(a.nodes, b.nodes);
}

#[test]
fn its_never_beats_exact() {
    for seed in 200..230 {
        let n = 2 + (seed as usize % 9);
        let inst = random_instance(seed, n);
        let exact = solve_exact(&inst, 60.0).unwrap().upper.unwrap();
        let cfg = ItsConfig {
            seed,
            time_budget_s: 5.0,
            ..Default::default()
        };
        let its = best_of_runs(&inst, &cfg, 3).unwrap();
        assert!(its.cost >= exact - 1e-6, "seed {seed}");
        assert!(validate(&inst, &its.solution).unwrap().feasible);
    }
}
