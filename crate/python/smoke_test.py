#!/usr/bin/env python3
"""Smoke test for the revman_py extension module.

Builds are expected at target/{release,debug}/librevman_py.so; run

    cargo build -p revman-py --release
    python3 python/smoke_test.py
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    for profile in ("release", "debug"):
        so = REPO / "target" / profile / "librevman_py.so"
        if so.exists():
            tmp = Path(tempfile.mkdtemp(prefix="revman_py_"))
            shutil.copy(so, tmp / "revman_py.so")
            sys.path.insert(0, str(tmp))
            import revman_py

            return revman_py
    raise SystemExit("librevman_py.so not found; run `cargo build -p revman-py` first")


def main():
    rp = load_module()

    # Tiny Poisson environment: T=1, one price p=5, lambda=2.
    env = rp.Environment.from_json(json.dumps({
        "family": "poisson",
        "T": 1,
        "prices": [5.0],
        "params": {"kind": "explicit", "table": [[2.0]]},
    }))
    assert env.horizon == 1 and env.prices == [5.0]
    assert abs(env.mean_demand()[0][0] - 2.0) < 1e-12

    # DP closed form: Rev* = 5 (1 - e^{-2}) for n0 = 1.
    table = rp.solve_dp(env, 1)
    expected = 5.0 * (1.0 - math.exp(-2.0))
    assert abs(table.rev_star - expected) < 1e-12, table.rev_star
    assert table.action(0, 1) == 0
    assert table.action(0, 0) is None  # shut-off once sold out

    # LP on a known two-period instance: objective 4 at prices (1, 2).
    plan = rp.solve_lp([[3.0, 1.0], [2.0, 1.0]], [1.0, 2.0], 2.0)
    assert abs(plan["objective"] - 4.0) < 1e-9, plan
    assert plan["x"] == [[0.0, 1.0], [0.0, 1.0]]
    assert abs(plan["dual_mu"] - 0.5) < 1e-9

    # Benchmark LP with a binding averaged budget.
    avg = rp.solve_lp_avg([10.0], [1.0], 50.0, 10)
    assert abs(avg["objective"] - 5.0) < 1e-9
    assert abs(avg["x"][0] - 0.5) < 1e-9

    # The full-scale preset reproduces the hindsight value.
    env_a, n0 = rp.Environment.preset("A1")
    assert n0 == 50
    rev_star = rp.solve_dp(env_a, n0).rev_star
    assert abs(rev_star - 330.08) < 0.02, rev_star

    # Seeded trials are reproducible and seed-sensitive.
    prior = json.dumps({"family": "gamma", "alpha": 10.0, "beta": 1.0})
    a = rp.run_trial(env_a, "ts-episodic", n0, 20, rp.trial_seed(7, 0), prior)
    b = rp.run_trial(env_a, "ts-episodic", n0, 20, rp.trial_seed(7, 0), prior)
    c = rp.run_trial(env_a, "ts-episodic", n0, 20, rp.trial_seed(7, 1), prior)
    assert a == b and a != c
    oracle = rp.run_trial(env_a, "ts-dynamic-star", n0, 20, 3)
    assert len(oracle) == 20 and all(r >= 0.0 for r in oracle)

    # Regret aggregation.
    means, stderrs = rp.regret_curve([a, c], rev_star)
    assert len(means) == 20 and len(stderrs) == 20
    assert all(m <= 1.0 + 1e-12 for m in means)

    # Shut-off demand is identically zero.
    assert env_a.sample_demand(0, None, 1) == 0

    print("smoke test OK")


if __name__ == "__main__":
    main()
