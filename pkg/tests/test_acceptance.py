"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines.  The optimizer cells (criteria 4, 5, 8) are computed once per session
by the optimized_cells fixture; a horizon-15 cell takes on the order of a
minute, so the full gate needs several minutes of compute.
"""

import math
import os
import time

import numpy as np
import pytest

import ordered_capacity as oc
from ordered_capacity import Allocation, GammaArrivals, OverflowChain, SimConfig, cli

from conftest import random_feasible_system
from test_geometric import lagrange_oracle


def report(num, ok, detail):
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


def test_criterion_1_erlang_b_equivalence():
    t0 = time.monotonic()
    worst = 0.0
    for lam, rate in [(0.3, 0.25), (0.2, 0.5), (0.55, 0.2)]:
        alloc = Allocation([rate] * 10, total=10 * rate + 1.0)
        chain = OverflowChain(GammaArrivals(lam, 1.0), alloc)
        p = oc.blocking_probabilities(chain, 10)
        for n in range(1, 11):
            worst = max(worst, abs(p[n - 1] - oc.erlang_b(lam / rate, n)))
    elapsed = time.monotonic() - t0
    ok = worst < 1e-10 and elapsed < 1.0
    assert report(1, ok, f"max |product form - Erlang B| = {worst:.2e}, {elapsed:.2f}s")


def test_criterion_2_mean_overflow_consistency():
    t0 = time.monotonic()
    rng = np.random.default_rng(101)
    worst_identity = 0.0
    worst_fd = 0.0
    for _ in range(5):
        model, alloc = random_feasible_system(rng, depth=8)
        chain = OverflowChain(model, alloc)
        p = oc.blocking_probabilities(chain, 8)
        for n in range(1, 9):
            identity = model.lam * float(p[n - 1]) * (-chain.lst_deriv(n, 0.0))
            worst_identity = max(worst_identity, abs(identity - 1.0))
        h = 1e-6
        for n in (1, 4, 8):
            for s in (0.05, 0.2):
                fd = (chain.lst(n, s + h) - chain.lst(n, s - h)) / (2 * h)
                rel = abs(chain.lst_deriv(n, s) - fd) / abs(fd)
                worst_fd = max(worst_fd, rel)
    elapsed = time.monotonic() - t0
    ok = worst_identity < 1e-8 and worst_fd < 1e-5 and elapsed < 10.0
    assert report(2, ok, f"identity err {worst_identity:.2e}, "
                         f"finite-diff err {worst_fd:.2e}, {elapsed:.1f}s")


def test_criterion_3_tap_closed_form():
    t0 = time.monotonic()
    m = 30
    worst = 0.0
    for ell in (0.1, 0.25, 0.5):
        root = math.sqrt(ell)
        weights = np.array([ell ** n for n in range(1, m + 1)])
        weights[-1] /= 1.0 - root
        caps = np.ones(m)
        caps[-1] = 1.0 / (1.0 - root)
        numeric = lagrange_oracle(weights, caps)
        closed = np.asarray(oc.tap_solution(ell, 1.0, m).rates)
        worst = max(worst, float(np.max(np.abs(numeric - closed))))
    elapsed = time.monotonic() - t0
    ok = worst < 1e-6 and elapsed < 5.0
    assert report(3, ok, f"max coordinate gap vs closed form {worst:.2e}, {elapsed:.1f}s")


def test_criterion_4_table_reproduction(optimized_cells):
    failures = []
    details = []
    strict = [("k1_r02", 3.22, 4.7e-5), ("k1_r04", 6.86, 0.014), ("k2_r04", 4.87, 0.001)]
    for key, es_target, rm_target in strict:
        result = optimized_cells[key]
        es_rel = abs(result.objective_value - es_target) / es_target
        rm_rel = abs(result.residual - rm_target) / rm_target
        details.append(f"{key}: ES {result.objective_value:.4g} ({es_rel:.1%} of {es_target})"
                       f", rM {result.residual:.3g} ({rm_rel:.0%} of {rm_target})")
        if es_rel > 0.03:
            failures.append(f"{key} ES off by {es_rel:.1%} (>3%)")
        if rm_rel > 0.30:
            failures.append(f"{key} rM off by {rm_rel:.0%} (>30%)")
    heavy = optimized_cells["k1_r08"]
    heavy_rel = abs(heavy.objective_value - 69.78) / 69.78
    details.append(f"k1_r08: ES {heavy.objective_value:.4g} ({heavy_rel:.1%} of 69.78)")
    if heavy_rel > 0.10:
        failures.append(f"k1_r08 ES off by {heavy_rel:.1%} (>10%)")
    ok = not failures
    assert report(4, ok, "; ".join(details) + ("; FAILED: " + "; ".join(failures) if failures else "")), failures


def test_criterion_5_first_rate_chart(optimized_cells):
    targets = {"k1_r02": (0.2, 0.50975), "k1_r05": (0.5, 0.22542), "k1_r08": (0.8, 0.06824)}
    failures = []
    details = []
    for key, (rho, published) in targets.items():
        mu1 = optimized_cells[key].allocation.rates[0]
        gap_pub = abs(mu1 - published)
        gap_sqrt = abs(mu1 - (1.0 - math.sqrt(rho)))
        details.append(f"rho={rho}: mu1={mu1:.5f} (chart {published}, gap {gap_pub:.4f})")
        if gap_pub > 0.02:
            failures.append(f"rho={rho} gap to chart {gap_pub:.4f} > 0.02")
        if gap_sqrt > 0.08:
            failures.append(f"rho={rho} gap to 1-sqrt(rho) {gap_sqrt:.4f} > 0.08")
    ok = not failures
    assert report(5, ok, "; ".join(details) + ("; FAILED: " + "; ".join(failures) if failures else "")), failures


def test_criterion_6_lemma_suite(feasible_batch):
    t0 = time.monotonic()
    rng = np.random.default_rng(202)
    violations = []
    for idx, (model, alloc) in enumerate(feasible_batch):
        chain = OverflowChain(model, alloc)
        p = np.concatenate([[1.0], oc.blocking_probabilities(chain, 8)])
        q = -np.diff(p)
        ell, lower = oc.ell_series(chain, 8)
        # strict transform monotonicity at a sampled level
        s1, s2 = sorted(rng.uniform(0.0, 3.0, size=2))
        lvl = int(rng.integers(0, 9))
        if s1 < s2 and not chain.lst(lvl, float(s1)) > chain.lst(lvl, float(s2)):
            violations.append(f"{idx}: monotonicity at level {lvl}")
        for s in rng.uniform(1e-3, 3.0, size=3):
            vals = [chain.lst(n, float(s)) for n in range(9)]
            if not all(a > b for a, b in zip(vals, vals[1:])):
                violations.append(f"{idx}: dominance at s={s:.3f}")
        if not all(p[n - 1] + p[n + 1] > 2 * p[n] for n in range(2, 8)):
            violations.append(f"{idx}: discrete convexity")
        if not all(a > b for a, b in zip(q, q[1:])):
            violations.append(f"{idx}: q not decreasing")
        if not (np.all(np.diff(lower) > 0) and np.all(lower <= ell + 1e-12)):
            violations.append(f"{idx}: lower-bound series")
        jensen = np.exp(-np.asarray(alloc.rates[:8]) / (model.lam * p[:-1]))
        if not np.all(ell >= jensen - 1e-12):
            violations.append(f"{idx}: Jensen bound")
    elapsed = time.monotonic() - t0
    ok = not violations and elapsed < 60.0
    assert report(6, ok, f"50 systems, {len(violations)} violations, {elapsed:.1f}s"), violations


def test_criterion_7_simulation_agreement():
    t0 = time.monotonic()
    rng = np.random.default_rng(303)
    total_cells = 0
    hits = 0
    for i in range(10):
        depth = int(rng.integers(3, 7))
        model, alloc = random_feasible_system(rng, depth=depth)
        chain = OverflowChain(model, alloc)
        p = oc.blocking_probabilities(chain, depth)
        sim = oc.simulate(SimConfig(model=model, rates=alloc.rates,
                                    arrivals=1_000_000, warmup=10_000, seed=1000 + i))
        for j in range(depth):
            total_cells += 1
            if abs(sim.p_hat[j] - p[j]) < 3 * sim.p_se[j]:
                hits += 1
    exact = oc.simulate(SimConfig(model=GammaArrivals(0.2, 1.0), rates=(0.5,),
                                  arrivals=1_000_000, warmup=10_000, seed=77))
    exact_ok = abs(exact.p_hat[0] - 2.0 / 7.0) < 3 * exact.p_se[0]
    elapsed = time.monotonic() - t0
    share = hits / total_cells
    ok = share >= 0.95 and exact_ok and elapsed < 300.0
    assert report(7, ok, f"{hits}/{total_cells} cells within 3 s.e. ({share:.0%}), "
                         f"M/M/1/0 within 3 s.e.: {exact_ok}, {elapsed:.0f}s")


def _grid_oracle_m3(model, mu=1.0, points=200):
    """Exhaustive lattice minimization of the horizon-3 objective.

    Closed-form nesting of the overflow recursion (no chain machinery): for
    each lattice triple the blocking ratios come straight from the base
    transform, the tail-capacity inequality is enforced, and the best
    feasible point wins.  Vectorized over (mu2, mu3) planes.
    """
    lst = model.lst
    axis = (np.arange(points) + 0.5) * (mu / points)
    mu2, mu3 = np.meshgrid(axis, axis, indexing="ij")
    best = (math.inf, None)
    for mu1 in axis:
        ell1 = float(lst(mu1))
        # level-1 transform at the points needed by levels 2 and 3
        def l1(y):
            return lst(mu1 + y) / (1.0 - lst(y) + lst(mu1 + y))

        ell2 = l1(mu2[:, 0])  # depends on mu2 only
        ell3 = l1(mu2 + mu3) / (1.0 - l1(mu3) + l1(mu2 + mu3))
        p1 = ell1
        p2 = p1 * ell2[:, None]
        p3 = p2 * ell3
        obj = ((1.0 - p1) / mu1 + (p1 - p2) / mu2 + (p2 - p3) / mu3
               + p3 * (1.0 + np.sqrt(ell3)) / (mu3 * np.sqrt(ell3)))
        feasible = (mu1 + mu2 + mu3 < mu) & (mu3 <= (1.0 - np.sqrt(ell3)) * (mu - mu1 - mu2))
        obj = np.where(feasible, obj, math.inf)
        idx = np.unravel_index(np.argmin(obj), obj.shape)
        if obj[idx] < best[0]:
            best = (float(obj[idx]), (float(mu1), float(mu2[idx]), float(mu3[idx])))
    return best


def test_criterion_8_optimizer_structure(optimized_cells):
    t0 = time.monotonic()
    failures = []
    for key, result in optimized_cells.items():
        rates = np.asarray(result.allocation.rates)
        if not np.all(np.diff(rates) <= 1e-12):
            failures.append(f"{key}: not non-increasing")
        if not np.all(np.diff(result.trace) <= 1e-12):
            failures.append(f"{key}: trace not non-increasing")
        lam = result.metrics.rho_eff[0]  # mu = 1 cells
        model = GammaArrivals(lam, 1.0 if key.startswith("k1") else 2.0)
        verdict = oc.is_feasible(OverflowChain(model, result.allocation), 15).verdict
        if verdict != "feasible":
            failures.append(f"{key}: optimized allocation not feasible")
    model = GammaArrivals(0.2, 1.0)
    cfg = oc.OptimizerConfig(horizon=3, restarts=1, max_sweeps=40, tol_rate=1e-7)
    mine = oc.optimize_allocation(model, 1.0, cfg)
    grid_value, grid_point = _grid_oracle_m3(model)
    step = 1.0 / 200
    gaps = [abs(a - b) for a, b in zip(mine.allocation.rates, grid_point)]
    if not all(g <= step + 1e-9 for g in gaps):
        failures.append(f"grid search gaps {gaps} exceed one lattice step {step}")
    elapsed = time.monotonic() - t0
    ok = not failures and elapsed < 600.0
    assert report(8, ok, f"cells structural checks, grid gaps "
                         f"{[f'{g:.4f}' for g in gaps]} vs step {step}, {elapsed:.0f}s"), failures


ACCEPT_CFG = """
mode = metrics
arrival.lambda = 0.2
capacity.mu = 1.0
alloc.kind = geometric
alloc.alpha = 0.5
alloc.depth = 12
output.figures = false
"""

ACCEPT_GRID_CFG = """
mode = papergrid
arrival.lambda = 0.2
capacity.mu = 1.0
grid.rho = 0.25
grid.k = 1
opt.M = 5
opt.restarts = 2
opt.max_sweeps = 10
output.figures = false
"""


def test_criterion_9_determinism(tmp_path):
    mismatched = []
    for name, text in (("metrics", ACCEPT_CFG), ("grid", ACCEPT_GRID_CFG)):
        cfg = tmp_path / f"{name}.cfg"
        cfg.write_text(text, encoding="utf-8")
        outs = []
        for run in ("a", "b"):
            out = tmp_path / f"{name}_{run}"
            assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
            outs.append(out)
        for fname in sorted(os.listdir(outs[0])):
            if not fname.endswith(".csv"):
                continue
            first = (outs[0] / fname).read_bytes()
            second = (outs[1] / fname).read_bytes()
            if first != second:
                mismatched.append(f"{name}/{fname}")
    ok = not mismatched
    assert report(9, ok, "byte-identical CSV artifacts across reruns"
                  + ("" if ok else f"; mismatches: {mismatched}")), mismatched
