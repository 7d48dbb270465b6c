"""Smoke test for the tcvrp_py extension.

Build and run from the repository root:

    cargo build -p tcvrp-py --features extension-module
    cp target/debug/libtcvrp_py.so python/tcvrp_py.so
    python3 python/smoke_test.py

or install with `maturin develop -m crates/py/Cargo.toml` and run the script.
"""

import json
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import tcvrp_py as t


def grid_instance(n, capacity, max_dist=40.0):
    pts = [((i * 7) % 5, (i * 3) % 4) for i in range(n + 1)]
    dist = [[abs(a[0] - b[0]) + abs(a[1] - b[1]) for b in pts] for a in pts]
    time = [[3.0 * d for d in row] for row in dist]
    demand = [0] + [1 + i % 3 for i in range(1, n + 1)]
    service = [0.0] + [2.0 + i for i in range(1, n + 1)]
    return t.Instance(demand, service, time, dist, capacity, 90.0, max_dist)


def main():
    inst = grid_instance(6, 6)
    assert inst.n == 6

    exact = t.solve_exact(inst, time_limit_s=30.0)
    assert exact.status == "optimal", exact.status
    assert exact.gap == 0.0
    best = exact.solution
    ok, violations = t.validate(inst, best)
    assert ok, violations

    heur = t.solve_its(inst, seed=1, time_budget_s=1.0, runs=3)
    ok, _ = t.validate(inst, heur)
    assert ok
    assert heur.vmt_mi >= best.vmt_mi - 1e-9
    assert abs(t.its_gap(best.vmt_mi, exact.lower)) < 1e-6

    one = grid_instance(1, 10)
    forced = t.Solution.from_routes(one, [[0, 1, 0]])
    assert t.solve_exact(one).solution.routes == forced.routes

    counts = t.mip_counts(grid_instance(2, 10))
    assert (counts["variables"], counts["constraints"]) == (25, 42), counts
    cv = grid_instance(2, 10, max_dist=None)
    assert t.mip_counts(cv)["distance"] == 0

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "two.mps")
        t.export_mps(grid_instance(2, 10), path)
        with open(path) as f:
            assert f.read() == t.mps_text(grid_instance(2, 10))

    assert t.mip_gap(90.0, 100.0) == 10.0
    bev, cv_kwh = t.energy(100.0)
    assert bev > 0 and cv_kwh > bev

    back = t.Instance.from_json(inst.to_json())
    assert json.loads(back.to_json()) == json.loads(inst.to_json())

    try:
        t.Instance.from_json("{bad")
    except ValueError:
        pass
    else:
        raise AssertionError("bad JSON accepted")

    print("smoke test passed:", best)


if __name__ == "__main__":
    main()
