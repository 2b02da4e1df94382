"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete. The two experiment-based criteria dominate the
runtime (the last one deliberately performs two full default runs).
"""

import json
import math
import time

import numpy as np
import pytest

from portfolio_lab.bounds import (
    BoundQuery,
    generalization_bound,
    lb_construct,
    lb_gap_experiment,
    lb_verify_shattering,
    pdim_upper_bound,
    verify_multiclass_shatter,
)
from portfolio_lab.harness import ExperimentConfig, run_experiment_detailed
from portfolio_lab.mipbench import Family, GeneratorSpec, bnb_run, dual_trace, generate_instance
from portfolio_lab.mipbench.bnb import LpCache
from portfolio_lab.mipbench.simplex import LpStatus, solve_box_lp
from portfolio_lab.piecewise import CandidateSet, Orientation, PerformanceTable
from portfolio_lab.portfolio import (
    GREEDY_ALPHA,
    coverage_reflected,
    exhaustive_select,
    greedy_select,
    verify_monotone_submodular,
)

from test_simplex import enumerate_vertices


def report(number, ok, detail):
    line = f"[acceptance {number}] {'PASS' if ok else 'FAIL'} — {detail}"
    print(line)
    assert ok, line


def random_table(rng, n_max, m_max):
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    U = rng.integers(0, 30, size=(n, m)).astype(float)
    orientation = Orientation.MAXIMIZE if rng.integers(0, 2) else Orientation.MINIMIZE
    params = tuple(np.linspace(0.0, 1.0, m + 2)[1:-1])
    return PerformanceTable(U, CandidateSet(params, m), orientation, 30.0)


def test_acceptance_1_submodularity_suite():
    t0 = time.time()
    rng = np.random.default_rng(101)
    failures = 0
    for _ in range(1000):
        table = random_table(rng, n_max=20, m_max=15)
        if not verify_monotone_submodular(table, 10_000, seed=int(rng.integers(1 << 31))):
            failures += 1
    elapsed = time.time() - t0
    report(
        1,
        failures == 0 and elapsed < 30.0,
        f"1000 tables x 10k triples, {failures} failures, {elapsed:.1f}s (< 30s)",
    )


def test_acceptance_2_greedy_guarantee():
    t0 = time.time()
    rng = np.random.default_rng(202)
    ok_trials = 0
    for _ in range(200):
        table = random_table(rng, n_max=12, m_max=10)
        kappa = int(rng.integers(1, 5))
        greedy, _ = greedy_select(table, kappa)
        exact = exhaustive_select(table, kappa)
        g = coverage_reflected(table, greedy)
        e = coverage_reflected(table, exact)
        if g >= GREEDY_ALPHA * e:
            ok_trials += 1
    elapsed = time.time() - t0
    report(
        2,
        ok_trials == 200 and elapsed < 10.0,
        f"greedy >= (1-1/e) x exhaustive in {ok_trials}/200 trials, {elapsed:.1f}s (< 10s)",
    )


def test_acceptance_3_dual_trace_exactness():
    t0 = time.time()
    grid = np.linspace(0.0, 1.0, 2001)
    exact_instances = 0
    for seed in range(50):
        family = Family.A if seed % 2 == 0 else Family.B
        items, bids = (6, 12) if family is Family.A else (7, 12)
        instance = generate_instance(GeneratorSpec(family, items, bids, seed=seed))
        cache = LpCache(instance)
        fn = dual_trace(instance, 2000, 2000)
        values = fn.eval_many(grid)
        if all(
            int(v) == bnb_run(instance, float(rho), 2000, cache=cache).tree_size
            for rho, v in zip(grid, values)
        ):
            exact_instances += 1
    elapsed = time.time() - t0
    report(
        3,
        exact_instances == 50 and elapsed < 300.0,
        f"trace == bnb on 2001-point grid for {exact_instances}/50 instances, {elapsed:.0f}s (< 300s)",
    )


def test_acceptance_4_lower_bound_shattering():
    t0 = time.time()
    shattered = all(lb_verify_shattering(lb_construct(k)) for k in range(2, 13))
    fam = lb_construct(8)
    projection_trivial = not verify_multiclass_shatter(
        fam.multiclass_projection(), fam.shattered_set, 1
    )
    elapsed = time.time() - t0
    report(
        4,
        shattered and projection_trivial and elapsed < 10.0,
        f"shattering true for kappa 2..12, projection fails d=1, {elapsed:.1f}s (< 10s)",
    )


def test_acceptance_5_gap_scaling():
    t0 = time.time()
    g8 = lb_gap_experiment(8, 200, trials=10_000, seed=51)
    g2 = lb_gap_experiment(2, 200, trials=10_000, seed=52)
    kappa_ratio = g8 / g2
    g_large = lb_gap_experiment(4, 3200, trials=10_000, seed=53)
    g_small = lb_gap_experiment(4, 800, trials=10_000, seed=54)
    n_ratio = g_large / g_small
    elapsed = time.time() - t0
    ok = 1.5 <= kappa_ratio <= 2.5 and 0.375 <= n_ratio <= 0.625 and elapsed < 30.0
    report(
        5,
        ok,
        f"gap(k=8)/gap(k=2) = {kappa_ratio:.3f} in [1.5, 2.5]; "
        f"gap(N=3200)/gap(N=800) = {n_ratio:.3f} in [0.375, 0.625]; {elapsed:.1f}s (< 30s)",
    )


def test_acceptance_6_overfitting_tradeoff():
    t0 = time.time()
    config = ExperimentConfig()  # seeded default: train size 30, kappa 15, 5 reps
    result = run_experiment_detailed(config, jobs=2)
    elapsed = time.time() - t0

    runs = {}
    for p in result.points:
        runs.setdefault((p.train_size, p.replication), []).append(p)
    oracle_monotone = True
    for pts in runs.values():
        pts.sort(key=lambda p: p.kappa)
        for a, b in zip(pts, pts[1:]):
            if b.oracle_ratio > a.oracle_ratio + 1e-12:
                oracle_monotone = False

    eps_by_kappa = {}
    for d in result.diagnostics:
        eps_by_kappa.setdefault(d["kappa"], []).append(d["epsilon_train"])
    eps_ok = all(np.mean(v) >= 0.0 for v in eps_by_kappa.values())

    mean_test = {}
    for p in result.points:
        mean_test.setdefault(p.kappa, []).append(p.test_ratio)
    mean_test = {k: float(np.mean(v)) for k, v in mean_test.items()}
    full_curve = len(result.greedy_params) == config.kappa_max
    u_shape = full_curve and mean_test[config.kappa_max] > min(mean_test.values())

    ok = oracle_monotone and eps_ok and u_shape and elapsed < 600.0
    report(
        6,
        ok,
        f"oracle nonincreasing: {oracle_monotone}; mean train epsilon >= 0: {eps_ok}; "
        f"test({config.kappa_max}) = {mean_test.get(config.kappa_max, float('nan')):.4f} > "
        f"min = {min(mean_test.values()):.4f}: {u_shape}; {elapsed:.0f}s (< 600s)",
    )


def test_acceptance_7_lp_solver_oracle():
    t0 = time.time()
    rng = np.random.default_rng(707)
    agreements = 0
    for _ in range(100):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(1, 7))
        c = rng.normal(size=n)
        A = rng.normal(size=(m, n))
        b = rng.normal(size=m)
        lo = rng.uniform(-2.0, 0.0, size=n)
        hi = lo + rng.uniform(0.5, 3.0, size=n)
        res = solve_box_lp(c, A, b, lo, hi)
        feasible, best = enumerate_vertices(c, A, b, lo, hi)
        if feasible == (res.status is LpStatus.OPTIMAL) and (
            not feasible or abs(best - res.objective) <= 1e-9
        ):
            agreements += 1
    elapsed = time.time() - t0
    report(
        7,
        agreements == 100 and elapsed < 10.0,
        f"simplex matches vertex enumeration in {agreements}/100 LPs, {elapsed:.1f}s (< 10s)",
    )


def test_acceptance_8_bound_calculators():
    t0 = time.time()
    worked = abs(
        pdim_upper_bound(BoundQuery(2, 2, 2, 100, 1.0, 0.05)) - (4 * math.log2(5) + 2)
    ) <= 1e-9

    base = dict(d_bar=3, kappa=4, t=5, N=64, H=2.0, delta=0.1)
    monotone = True
    for arg, increasing in (("d_bar", True), ("kappa", True), ("t", True), ("N", False)):
        up = dict(base)
        down = dict(base)
        up[arg] += 1
        down[arg] -= 1
        for variant, should_be_higher in ((up, increasing), (down, not increasing)):
            qv = BoundQuery(**variant)
            qb = BoundQuery(**base)
            pv = pdim_upper_bound(qv)
            pb = pdim_upper_bound(qb)
            gv = generalization_bound(qv, pv)
            gb = generalization_bound(qb, pb)
            if arg != "N" and should_be_higher and (pv < pb or gv < gb):
                monotone = False
            if arg != "N" and not should_be_higher and (pv > pb or gv > gb):
                monotone = False
            if arg == "N":
                if should_be_higher and gv < gb:
                    monotone = False
                if not should_be_higher and gv > gb:
                    monotone = False
    # delta direction: shrinking delta (larger 1/delta) grows the bound
    qd_small = BoundQuery(**{**base, "delta": 0.05})
    qd_large = BoundQuery(**{**base, "delta": 0.2})
    if not (
        generalization_bound(qd_small, pdim_upper_bound(qd_small))
        >= generalization_bound(qd_large, pdim_upper_bound(qd_large))
    ):
        monotone = False
    elapsed = time.time() - t0
    report(
        8,
        worked and monotone and elapsed < 1.0,
        f"worked value exact to 1e-9: {worked}; two-sided monotonicity: {monotone}; "
        f"{elapsed:.2f}s (< 1s)",
    )


def test_acceptance_9_experiment_determinism(tmp_path):
    from portfolio_lab.cli import main

    config = ExperimentConfig()
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config.to_json()))
    t0 = time.time()
    assert main(["experiment", "--config", str(cfg_path), "--out-prefix", str(tmp_path / "r1"), "--jobs", "2"]) == 0
    assert main(["experiment", "--config", str(cfg_path), "--out-prefix", str(tmp_path / "r2"), "--jobs", "1"]) == 0
    elapsed = time.time() - t0
    csv_same = (tmp_path / "r1.csv").read_bytes() == (tmp_path / "r2.csv").read_bytes()
    m1 = json.load(open(tmp_path / "r1.manifest.json"))
    m2 = json.load(open(tmp_path / "r2.manifest.json"))
    m1.pop("timings")
    m2.pop("timings")
    report(
        9,
        csv_same and m1 == m2,
        f"two default runs at jobs 2 and 1: CSV bytes identical: {csv_same}; "
        f"manifests identical sans timings: {m1 == m2}; {elapsed:.0f}s",
    )
