"""Shared fixtures: random feasible allocations and cached optimizer cells."""

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

import ordered_capacity as oc


def random_feasible_system(rng, depth=8, mu=1.0):
    """A random arrival model plus a strictly feasible non-increasing prefix."""
    k = float(rng.choice([0.5, 1.0, 2.0]))
    lam = float(rng.uniform(0.1, 0.7)) * mu
    alpha = float(rng.uniform(0.3, 0.9))
    model = oc.GammaArrivals(lam, k)
    alloc = oc.feasible_construction(model, mu, alpha, depth)
    return model, alloc


# (lam, k) cells optimized at horizon 15, shared by optimizer and acceptance tests
CELLS = {
    "k1_r02": (0.2, 1.0),
    "k1_r04": (0.4, 1.0),
    "k2_r04": (0.4, 2.0),
    "k1_r05": (0.5, 1.0),
    "k1_r06": (0.6, 1.0),
    "k1_r08": (0.8, 1.0),
}


def _solve_cell(args):
    lam, k = args
    cfg = oc.OptimizerConfig(horizon=15, restarts=1, max_sweeps=50)
    return oc.optimize_allocation(oc.GammaArrivals(lam, k), 1.0, cfg)


@pytest.fixture(scope="session")
def optimized_cells():
    """Horizon-15 optimizer results for the shared parameter cells."""
    workers = min(2, os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_cell, CELLS.values()))
    else:
        results = [_solve_cell(args) for args in CELLS.values()]
    return dict(zip(CELLS, results))


@pytest.fixture(scope="session")
def feasible_batch():
    """Fifty random feasible systems reused by the property suites."""
    rng = np.random.default_rng(20240817)
    return [random_feasible_system(rng) for _ in range(50)]
